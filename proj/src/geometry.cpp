#include "detbound/geometry.hpp"

#include "detbound/fisher.hpp"
#include "detbound/sld.hpp"

#include <cmath>

namespace detbound {

double operator_fidelity(const Mat& a, const Mat& b) {
  Mat sa = psd_sqrt(a);
  require_hermitian(b, "operator_fidelity");
  if (min_eigenvalue(b) < -1e-10 * std::max(1.0, max_abs(b))) throw NotPsdError("operator_fidelity: B is not PSD");
  Mat inner = hermitian_part(Mat(sa * b * sa));
  // Tr sqrt(sqrt(A) B sqrt(A)) from the clamped spectrum.
  auto e = hermitian_eig(inner);
  double f = 0;
  for (Eigen::Index i = 0; i < e.values.size(); ++i) f += std::sqrt(std::max(e.values(i), 0.0));
  return f;
}

double bures_total_distance(const Povm& p1, const Povm& p2) {
  if (p1.size() != p2.size()) throw DimensionError("bures_total_distance: outcome counts differ");
  if (p1.front().rows() != p2.front().rows()) throw DimensionError("bures_total_distance: dimensions differ");
  const double d = double(p1.front().rows());
  double fsum = 0;
  for (std::size_t j = 0; j < p1.size(); ++j) fsum += operator_fidelity(p1[j], p2[j]);
  return 2 * d - 2 * fsum;
}

double trace_dqfi_of(const Povm& povm, const std::vector<Mat>& dpi) {
  std::vector<Mat> slds;
  for (std::size_t j = 0; j < povm.size(); ++j) slds.push_back(sld_eig(povm[j], dpi[j]));
  return trace_dqfi(slds, povm);
}

BuresConvergence bures_qfi_check(const DetectorModel& model, const RVec& theta, const std::vector<double>& deltas,
                                 int k) {
  BuresConvergence out;
  const Povm base = model.povm(theta);
  out.j_trace = trace_dqfi_of(base, model.derivatives(theta).at(k));
  out.deltas = deltas;
  for (double dl : deltas) {
    RVec shifted = theta;
    shifted(k) += dl;
    double dist = bures_total_distance(base, model.povm(shifted));
    double ratio = 4 * dist / (dl * dl);
    out.ratios.push_back(ratio);
    out.errors.push_back(std::abs(ratio - out.j_trace));
  }
  out.converged = deltas.size() >= 2;
  for (std::size_t i = 1; i < deltas.size(); ++i) {
    // At least linear shrinkage with delta, with slack for rounding near the floor.
    double allowed = out.errors[i - 1] * (deltas[i] / deltas[i - 1]) * 1.5 + 1e-6 * out.j_trace;
    if (!(out.errors[i] <= allowed)) out.converged = false;
  }
  return out;
}

ConvexityReport convexity_check(const Povm& p1, const std::vector<Mat>& d1, const Povm& p2,
                                const std::vector<Mat>& d2, const std::vector<double>& lambdas_in) {
  if (p1.size() != p2.size() || p1.front().rows() != p2.front().rows()) {
    throw DimensionError("convexity_check: models are not compatible");
  }
  std::vector<double> lambdas = lambdas_in;
  if (lambdas.empty())
    for (int i = 1; i <= 9; ++i) lambdas.push_back(i / 10.0);
  ConvexityReport r;
  r.lambdas = lambdas;
  const double j1 = trace_dqfi_of(p1, d1), j2 = trace_dqfi_of(p2, d2);
  r.ok = true;
  r.worst_margin = std::numeric_limits<double>::infinity();
  for (double l : lambdas) {
    Povm mix(p1.size());
    std::vector<Mat> dmix(p1.size());
    for (std::size_t j = 0; j < p1.size(); ++j) {
      mix[j] = l * p1[j] + (1 - l) * p2[j];
      dmix[j] = l * d1[j] + (1 - l) * d2[j];
    }
    double jm = trace_dqfi_of(mix, dmix);
    double jc = l * j1 + (1 - l) * j2;
    r.mixed.push_back(jm);
    r.combined.push_back(jc);
    double margin = jc - jm;
    r.worst_margin = std::min(r.worst_margin, margin);
    if (margin < -1e-8 * std::max(1.0, jc)) r.ok = false;
  }
  return r;
}

std::pair<Povm, std::vector<Mat>> apply_channel(const std::vector<Mat>& kraus, const Povm& povm,
                                                const std::vector<Mat>& dpi) {
  Povm p = effective_povm(kraus, povm);
  std::vector<Mat> d;
  for (const auto& e : dpi) {
    Mat s = Mat::Zero(e.rows(), e.cols());
    for (const auto& k : kraus) s += k.adjoint() * e * k;
    d.push_back(s);
  }
  return {p, d};
}

}  // namespace detbound
