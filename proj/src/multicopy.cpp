#include "detbound/multicopy.hpp"

#include <cmath>

namespace detbound {

namespace {

// Operator acting as ops[i] on copy i and identity elsewhere.
Mat place(const std::vector<std::pair<int, const Mat*>>& ops, int n, Eigen::Index d) {
  Mat out = Mat::Identity(1, 1);
  const Mat id = identity(d);
  for (int c = 0; c < n; ++c) {
    const Mat* f = &id;
    for (const auto& [pos, m] : ops)
      if (pos == c) f = m;
    out = kron(out, *f);
  }
  return out;
}

}  // namespace

Mat q_ncopy(const std::vector<Mat>& slds, const Povm& povm, int n) {
  if (n < 1) throw Error("q_ncopy: n must be at least 1");
  const auto d = povm.front().rows();
  if (std::pow(double(d), n) > kMaxDim) {
    throw DimensionError("q_ncopy: dimension " + std::to_string(d) + "^" + std::to_string(n) + " exceeds 64");
  }
  const Mat q = q_operator(slds, povm);
  const Mat a = a_operator(slds, povm);
  const Mat ad = a.adjoint();
  const auto dim = Eigen::Index(std::llround(std::pow(double(d), n)));
  Mat out = Mat::Zero(dim, dim);
  for (int i = 0; i < n; ++i) out += place({{i, &q}}, n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) out += place({{i, &a}, {j, &ad}}, n, d);
  return hermitian_part(out);
}

NcopyDqfi dqfi_ncopy(const Mat& q_n) {
  NcopyDqfi r;
  r.spectral = max_eigenvalue(q_n);
  r.trace = q_n.trace().real();
  return r;
}

double a_norm(const std::vector<Mat>& slds, const Povm& povm) {
  Mat a = a_operator(slds, povm);
  return max_eigenvalue(Mat(a.adjoint() * a));
}

SandwichReport sandwich_check(double j1, double jn, int n, double an, double jtr_n, double d) {
  SandwichReport r;
  const double upper = n * j1 + n * (n - 1.0) * an;
  const double tol = 1e-8 * std::max(1.0, std::abs(upper));
  r.lower_margin = jn - n * j1;
  r.upper_margin = upper - jn;
  r.sandwich_ok = r.lower_margin >= -tol && r.upper_margin >= -tol;
  const double dn = std::pow(d, n);
  const double otol = 1e-8 * std::max(1.0, std::abs(jtr_n));
  r.ordering_ok = jtr_n / dn <= jn + otol && jn <= jtr_n + otol && jtr_n <= dn * jn + otol;
  r.ok = r.sandwich_ok && r.ordering_ok;
  return r;
}

}  // namespace detbound
