#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "tsf/binary_io.hpp"
#include "tsf/errors.hpp"
#include "tsf/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kConvergence = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string strategy;
  std::optional<int> jobs;
  std::string input, output;
  std::size_t cell = 16;
};

tsf::RunConfig resolve(const Options& o) {
  auto c = o.config.empty() ? tsf::RunConfig{} : tsf::RunConfig::load(o.config);
  if (o.seed) c.set_seed(*o.seed);
  if (!o.out.empty()) c.out = o.out;
  if (!o.strategy.empty()) c.strategy = tsf::parse_strategy(o.strategy);
  if (o.jobs) c.jobs = *o.jobs;
  return c;
}

void log_line(const std::string& s) { std::cerr << "[tsf] " << s << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stream video classification: data, flow, training, fusion and evaluation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool with_strategy) {
    sub->add_option("--config", o.config, "run config file (section.key = value)");
    sub->add_option("--seed", o.seed, "training seed (streams and SVM)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    if (with_strategy) sub->add_option("--strategy", o.strategy, "spatial_only | temporal_only | early | mid | late");
  };
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic clip dataset");
  common(gen, false);
  auto* flow = app.add_subcommand("compute-flow", "compute optical flow for every clip");
  common(flow, false);
  auto* train = app.add_subcommand("train", "train the streams (and SVM) a strategy needs");
  common(train, true);
  auto* eval = app.add_subcommand("eval", "evaluate a strategy from existing checkpoints");
  common(eval, true);
  auto* all = app.add_subcommand("run-all", "run every strategy and print the comparison table");
  common(all, false);
  auto* render = app.add_subcommand("render-confusion", "render a confusion CSV as a row-normalised PGM");
  render->add_option("--input", o.input, "confusion matrix CSV")->required();
  render->add_option("--output", o.output, "output .pgm")->required();
  render->add_option("--cell", o.cell, "pixels per matrix cell")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  std::optional<tsf::Pipeline> pipeline;
  try {
    if (render->parsed()) {
      if (!std::filesystem::exists(o.input)) throw tsf::DataError("confusion csv " + o.input + " does not exist");
      const auto m = tsf::parse_confusion_csv(tsf::io::read_text_file(o.input));
      tsf::io::write_file(o.output, tsf::confusion_pgm(m, o.cell));
      return kOk;
    }
    pipeline.emplace(resolve(o), log_line);
    auto& p = *pipeline;
    const auto strategy = p.config().strategy;
    if (gen->parsed()) {
      const auto& m = p.data();
      std::cout << m.entries.size() << " clips in " << (p.config().out / "data").string() << "\n";
    } else if (flow->parsed()) {
      const auto dir = p.flows();
      std::cout << "flows in " << dir.string() << "\n";
    } else if (train->parsed()) {
      for (auto kind : tsf::strategy_streams(strategy)) p.stream(kind);
      if (strategy == tsf::Strategy::mid) p.svm();
    } else if (eval->parsed()) {
      const std::vector<tsf::EvalReport> r{p.evaluate(strategy, false)};
      std::cout << tsf::report_table_text(r);
    } else if (all->parsed()) {
      const auto reports = p.run_all();
      std::cout << tsf::report_table_text(reports);
    }
    return kOk;
  } catch (const tsf::Error& e) {
    const std::string stage = pipeline && !pipeline->current_stage().empty() ? pipeline->current_stage() : "";
    std::cerr << "error: " << (stage.empty() ? "" : "stage " + stage + " failed: ") << e.what() << "\n";
    if (dynamic_cast<const tsf::UsageError*>(&e) || dynamic_cast<const tsf::InputError*>(&e)) return kUsage;
    if (dynamic_cast<const tsf::ConvergenceError*>(&e) || dynamic_cast<const tsf::DivergenceError*>(&e) ||
        dynamic_cast<const tsf::TrainingError*>(&e)) {
      return kConvergence;
    }
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
}
