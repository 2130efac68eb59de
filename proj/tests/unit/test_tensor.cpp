#include <gtest/gtest.h>

#include <cmath>

#include "qsnn/error.hpp"
#include "qsnn/tensor.hpp"

using namespace qsnn;

TEST(Tensor, ShapeAndSizeAgree) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.row_size(), 3u);
  EXPECT_DOUBLE_EQ(t.sum(), 9.0);
}

TEST(Tensor, RejectsZeroDimension) {
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
}

TEST(Tensor, RejectsDataOfWrongLength) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, MatrixLiteralIsRowMajor) {
  const Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.shape(), (Shape{2, 3}));
  EXPECT_EQ(m.at(1, 0), 4.0);
  EXPECT_EQ(m[5], 6.0);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), ShapeError);
}

TEST(Tensor, RankOneIsASingleRow) {
  const Tensor v = Tensor::vector({1, 2, 3});
  EXPECT_EQ(v.rows(), 1u);
  EXPECT_EQ(v.row(0).size(), 3u);
}

TEST(Tensor, ReshapeKeepsData) {
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor flat = m.reshaped({4});
  EXPECT_EQ(flat.values(), m.values());
  EXPECT_THROW(m.reshaped({3}), ShapeError);
}

TEST(Tensor, FiniteCheck) {
  Tensor t({3});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}
