#include "tsf/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "tsf/binary_io.hpp"
#include "tsf/errors.hpp"

namespace tsf {

namespace {

std::string percent(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * ratio);
  return buf;
}

std::vector<std::vector<std::string>> table_cells(std::span<const EvalReport> reports) {
  std::size_t n = 0;
  for (const auto& r : reports) n = std::max(n, r.per_class.size());
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"method"});
  for (std::size_t j = 0; j < n; ++j) rows[0].push_back("C" + std::to_string(j));
  rows[0].push_back("Total");
  for (const auto& r : reports) {
    if (r.per_class.size() != n) throw ShapeError("reports cover different class counts");
    std::vector<std::string> row{r.method};
    for (const auto& a : r.per_class) row.push_back(a ? percent(*a) : "n/a");
    row.push_back(percent(r.total_accuracy()));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < n; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < n; ++j) s += at(j, j);
  return s;
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels, std::size_t n) {
  if (predictions.size() != labels.size()) {
    throw DataError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix m(n);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i], p = predictions[i];
    if (t < 0 || static_cast<std::size_t>(t) >= n) {
      throw DataError("confusion: label " + std::to_string(t) + " out of range at position " + std::to_string(i));
    }
    if (p < 0 || static_cast<std::size_t>(p) >= n) {
      throw DataError("confusion: prediction " + std::to_string(p) + " out of range at position " + std::to_string(i));
    }
    ++m.counts[static_cast<std::size_t>(t) * n + static_cast<std::size_t>(p)];
  }
  return m;
}

EvalReport report(const ConfusionMatrix& matrix, const std::string& method) {
  EvalReport r;
  r.method = method;
  r.matrix = matrix;
  r.correct = matrix.trace();
  r.evaluated = matrix.total();
  for (std::size_t j = 0; j < matrix.n; ++j) {
    const auto row = matrix.row_sum(j);
    if (row == 0) {
      r.per_class.emplace_back();
    } else {
      r.per_class.emplace_back(static_cast<double>(matrix.at(j, j)) / static_cast<double>(row));
    }
  }
  return r;
}

std::string report_table_csv(std::span<const EvalReport> reports) {
  std::string out;
  for (const auto& row : table_cells(reports)) {
    for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + row[k];
    out += '\n';
  }
  return out;
}

std::string report_raw_csv(std::span<const EvalReport> reports) {
  std::ostringstream os;
  os << "method,class,correct,count,ratio\n";
  char buf[40];
  for (const auto& r : reports) {
    for (std::size_t j = 0; j < r.matrix.n; ++j) {
      const auto row = r.matrix.row_sum(j), hit = r.matrix.at(j, j);
      os << r.method << ",C" << j << ',' << hit << ',' << row << ',';
      if (row) {
        std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(hit) / static_cast<double>(row));
        os << buf;
      } else {
        os << "n/a";
      }
      os << '\n';
    }
    std::snprintf(buf, sizeof buf, "%.17g", r.total_accuracy());
    os << r.method << ",Total," << r.correct << ',' << r.evaluated << ',' << buf << '\n';
  }
  return os.str();
}

std::string report_table_text(std::span<const EvalReport> reports) {
  const auto rows = table_cells(reports);
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& row : rows)
    for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      const std::string pad(width[k] - row[k].size(), ' ');
      out += k == 0 ? row[k] + pad : "  " + pad + row[k];
    }
    out += '\n';
  }
  return out;
}

std::string confusion_csv(const ConfusionMatrix& m) {
  std::ostringstream os;
  os << "true\\pred";
  for (std::size_t p = 0; p < m.n; ++p) os << ",C" << p;
  os << '\n';
  for (std::size_t t = 0; t < m.n; ++t) {
    os << 'C' << t;
    for (std::size_t p = 0; p < m.n; ++p) os << ',' << m.at(t, p);
    os << '\n';
  }
  return os.str();
}

ConfusionMatrix parse_confusion_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw DataError("confusion csv is empty");
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "true\\pred") throw DataError("confusion csv has no 'true\\pred' header");
  ConfusionMatrix m(header.size() - 1);
  for (std::size_t t = 0; t < m.n; ++t) {
    if (!std::getline(is, line)) throw DataError("confusion csv ends after " + std::to_string(t) + " rows");
    const auto cells = split_csv(line);
    if (cells.size() != m.n + 1) throw DataError("confusion csv row " + std::to_string(t + 1) + " has wrong width");
    for (std::size_t p = 0; p < m.n; ++p) {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(cells[p + 1], &used);
        if (used != cells[p + 1].size() || v < 0) throw std::invalid_argument("negative");
        m.counts[t * m.n + p] = static_cast<std::uint64_t>(v);
      } catch (const std::exception&) {
        throw DataError("confusion csv row " + std::to_string(t + 1) + ": bad count '" + cells[p + 1] + "'");
      }
    }
  }
  return m;
}

std::vector<std::uint8_t> confusion_pgm(const ConfusionMatrix& m, std::size_t cell) {
  if (m.n == 0 || cell == 0) throw InputError("confusion image needs classes and a positive cell size");
  const std::size_t side = m.n * cell;
  std::vector<std::uint8_t> px(side * side, 0);
  for (std::size_t t = 0; t < m.n; ++t) {
    const auto row = m.row_sum(t);
    for (std::size_t p = 0; p < m.n; ++p) {
      const std::uint8_t v =
          row ? static_cast<std::uint8_t>((255 * m.at(t, p) + row / 2) / row) : std::uint8_t{0};
      for (std::size_t i = 0; i < cell; ++i) std::fill_n(px.begin() + static_cast<std::ptrdiff_t>((t * cell + i) * side + p * cell), cell, v);
    }
  }
  return io::encode_pgm(side, side, px);
}

}  // namespace tsf
