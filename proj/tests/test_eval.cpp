#include <gtest/gtest.h>

#include "tsf/binary_io.hpp"
#include "tsf/errors.hpp"
#include "tsf/eval.hpp"

using namespace tsf;

TEST(Confusion, PerfectIsDiagonal) {
  const std::vector<int> y{0, 1, 2, 2, 5, 4, 3};
  const auto m = confusion(y, y, 6);
  EXPECT_EQ(m.trace(), y.size());
  EXPECT_EQ(m.total(), y.size());
  EXPECT_EQ(m.at(2, 2), 2u);
  const auto r = report(m, "x");
  EXPECT_DOUBLE_EQ(r.total_accuracy(), 1.0);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_DOUBLE_EQ(r.per_class[j].value(), 1.0);
}

TEST(Confusion, AllPredictedZero) {
  const std::vector<int> y{0, 1, 2, 1}, p(4, 0);
  const auto m = confusion(p, y, 3);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(m.at(t, 0), m.row_sum(t));
    EXPECT_EQ(m.at(t, 1) + m.at(t, 2), 0u);
  }
}

TEST(Confusion, HandCountTwoByTwo) {
  const std::vector<int> p{0, 1, 1}, y{0, 1, 0};
  const auto m = confusion(p, y, 2);
  EXPECT_EQ(m.counts, (std::vector<std::uint64_t>{1, 1, 0, 1}));
  const auto r = report(m, "hand");
  EXPECT_DOUBLE_EQ(r.per_class[0].value(), 0.5);
  EXPECT_DOUBLE_EQ(r.per_class[1].value(), 1.0);
  EXPECT_EQ(r.correct, 2u);
  EXPECT_EQ(r.evaluated, 3u);
  EXPECT_DOUBLE_EQ(r.total_accuracy(), 2.0 / 3.0);
}

TEST(Confusion, OutOfRangeNamesPosition) {
  const std::vector<int> p{0, 3, 1}, y{0, 1, 1};
  try {
    confusion(p, y, 3);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("position 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(confusion(std::vector<int>{0}, y, 3), DataError);
}

TEST(Report, EmptyClassIsUndefined) {
  const std::vector<int> p{0, 1, 1}, y{0, 1, 1};
  const auto r = report(confusion(p, y, 3), "m");
  EXPECT_FALSE(r.per_class[2].has_value());
  EXPECT_DOUBLE_EQ(r.total_accuracy(), 1.0);
  const std::vector<EvalReport> rs{r};
  EXPECT_EQ(report_table_csv(rs), "method,C0,C1,C2,Total\nm,100.0,100.0,n/a,100.0\n");
}

TEST(Report, TableLayoutAndRawRatios) {
  const std::vector<int> p{0, 1, 1, 2, 2, 2, 0}, y{0, 1, 0, 2, 2, 1, 2};
  std::vector<EvalReport> rs{report(confusion(p, y, 3), "spatial"), report(confusion(y, y, 3), "mid")};
  EXPECT_EQ(report_table_csv(rs),
            "method,C0,C1,C2,Total\n"
            "spatial,50.0,50.0,66.7,57.1\n"
            "mid,100.0,100.0,100.0,100.0\n");
  const auto raw = report_raw_csv(rs);
  EXPECT_EQ(raw.rfind("method,class,correct,count,ratio\n", 0), 0u);
  EXPECT_NE(raw.find("spatial,Total,4,7,0.5714285714285714"), std::string::npos) << raw;
  EXPECT_NE(report_table_text(rs).find("Total"), std::string::npos);
}

TEST(ConfusionCsv, RoundTrip) {
  const std::vector<int> p{0, 1, 1, 2, 2, 2, 0}, y{0, 1, 0, 2, 2, 1, 2};
  const auto m = confusion(p, y, 3);
  const auto csv = confusion_csv(m);
  EXPECT_EQ(csv, "true\\pred,C0,C1,C2\nC0,1,1,0\nC1,0,1,1\nC2,1,0,2\n");
  EXPECT_EQ(parse_confusion_csv(csv), m);
  EXPECT_THROW(parse_confusion_csv("true\\pred,C0,C1\nC0,1,x\nC1,0,1\n"), DataError);
  EXPECT_THROW(parse_confusion_csv("a,b\n"), DataError);
}

TEST(ConfusionImage, RowNormalisedBlocks) {
  ConfusionMatrix m(2);
  m.counts = {3, 1, 0, 0};
  const auto img = io::decode_pgm(confusion_pgm(m, 4));
  ASSERT_EQ(img.height, 8u);
  ASSERT_EQ(img.width, 8u);
  EXPECT_EQ(img.pixels[0], 191);          // 255 * 3/4, rounded
  EXPECT_EQ(img.pixels[3 * 8 + 7], 64);   // 255 * 1/4
  EXPECT_EQ(img.pixels[5 * 8 + 1], 0);    // empty row
}
