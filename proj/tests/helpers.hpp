#pragma once

#include "detbound/linalg.hpp"
#include "detbound/models.hpp"

#include <cmath>
#include <random>

namespace testing_util {

using detbound::Mat;
using detbound::RVec;

inline RVec vec1(double x) {
  RVec v(1);
  v << x;
  return v;
}

inline RVec vec2(double x, double y) {
  RVec v(2);
  v << x, y;
  return v;
}

inline Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

inline Mat random_hermitian(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = {g(rng), g(rng)};
  return (a + a.adjoint()) / 2.0;
}

inline Mat random_unitary(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = {g(rng), g(rng)};
  Eigen::HouseholderQR<Mat> qr(a);
  return qr.householderQ() * Mat::Identity(d, d);
}

inline detbound::Vec random_state(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  detbound::Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = {g(rng), g(rng)};
  return v / v.norm();
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace testing_util
