#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tsf {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t n = 0;
  std::vector<std::uint64_t> counts;  // n x n, row-major

  explicit ConfusionMatrix(std::size_t classes = 0) : n(classes), counts(classes * classes, 0) {}

  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * n + pred]; }
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t total() const;
  std::uint64_t trace() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

// Throws DataError naming the position of a length mismatch or an index
// outside [0, n).
ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels, std::size_t n);

struct EvalReport {
  std::string method;
  // Per-class recall; empty for a class with no test items.
  std::vector<std::optional<double>> per_class;
  std::uint64_t correct = 0;
  std::uint64_t evaluated = 0;
  ConfusionMatrix matrix;

  double total_accuracy() const { return evaluated ? static_cast<double>(correct) / static_cast<double>(evaluated) : 0.0; }
};

EvalReport report(const ConfusionMatrix& matrix, const std::string& method);

// "method,C0,...,C{n-1},Total" with percentages to one decimal; "n/a" for an
// undefined class.
std::string report_table_csv(std::span<const EvalReport> reports);
// Exact counts behind the percentages: method,class,correct,count,ratio.
std::string report_raw_csv(std::span<const EvalReport> reports);
// Aligned plain-text version of report_table_csv for terminals.
std::string report_table_text(std::span<const EvalReport> reports);

// "true\pred,C0,..." header then one row of counts per true class.
std::string confusion_csv(const ConfusionMatrix& matrix);
ConfusionMatrix parse_confusion_csv(const std::string& text);

// Grayscale image with cell x cell blocks; each block is 255 * count / row
// sum (rows with no items are black).
std::vector<std::uint8_t> confusion_pgm(const ConfusionMatrix& matrix, std::size_t cell = 16);

}  // namespace tsf
