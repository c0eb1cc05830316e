#include "detbound/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace detbound {

namespace {

struct PureEval {
  double value = 0;
  Vec grad;  // Euclidean ascent direction in C^d
  bool valid = true;
};

// CFI of a normalised pure state with its gradient.
PureEval pure_cfi(const Povm& povm, const std::vector<Mat>& dpi, const Vec& psi, bool with_grad) {
  PureEval out;
  if (with_grad) out.grad = Vec::Zero(psi.size());
  for (std::size_t j = 0; j < povm.size(); ++j) {
    Vec pp = povm[j] * psi, dp = dpi[j] * psi;
    double p = psi.dot(pp).real();
    double d = psi.dot(dp).real();
    if (p <= kZeroProbability) {
      if (std::abs(d) > kZeroDerivative) {
        out.valid = false;
        return out;
      }
      continue;
    }
    out.value += d * d / p;
    if (with_grad) out.grad += (4.0 * d / p) * dp - (2.0 * d * d / (p * p)) * pp;
  }
  return out;
}

double safe_pure_cfi(const Povm& povm, const std::vector<Mat>& dpi, const Vec& psi) {
  PureEval e = pure_cfi(povm, dpi, psi, false);
  return e.valid ? e.value : -1;
}

Vec bloch_vector(double theta, double phi) {
  Vec psi(2);
  psi << std::cos(theta / 2), std::polar(1.0, phi) * std::sin(theta / 2);
  return psi;
}

Vec haar_vector(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = cplx(n(rng), n(rng));
  return v / v.norm();
}

void keep_best(CfiMaxResult& best, const CfiMaxResult& cand) {
  if (cand.probe.size() == 0) return;
  if (best.probe.size() == 0 || cand.value > best.value) best = cand;
}

}  // namespace

RVec probabilities(const Mat& rho, const Povm& povm) {
  RVec p(povm.size());
  for (std::size_t j = 0; j < povm.size(); ++j) p(Eigen::Index(j)) = (rho * povm[j]).trace().real();
  return p;
}

double cfi(const Mat& rho, const Povm& povm, const std::vector<Mat>& dpi) {
  if (dpi.size() != povm.size()) throw DimensionError("cfi: derivative count mismatch");
  double f = 0;
  for (std::size_t j = 0; j < povm.size(); ++j) {
    double p = (rho * povm[j]).trace().real();
    double d = (rho * dpi[j]).trace().real();
    if (p <= kZeroProbability) {
      if (std::abs(d) > kZeroDerivative) {
        throw DivergentInformation("cfi: outcome " + std::to_string(j) +
                                   " has zero probability but nonzero derivative (infinite information)");
      }
      continue;
    }
    f += d * d / p;
  }
  return f;
}

RMat cfi_matrix(const Mat& rho, const Povm& povm, const DerivativeSet& derivs) {
  const auto n = Eigen::Index(derivs.size());
  RMat f = RMat::Zero(n, n);
  RVec dp(n);
  for (std::size_t j = 0; j < povm.size(); ++j) {
    double p = (rho * povm[j]).trace().real();
    for (Eigen::Index k = 0; k < n; ++k) dp(k) = (rho * derivs[k][j]).trace().real();
    if (p <= kZeroProbability) {
      if (dp.cwiseAbs().maxCoeff() > kZeroDerivative) {
        throw DivergentInformation("cfi_matrix: outcome " + std::to_string(j) +
                                   " has zero probability but nonzero derivative (infinite information)");
      }
      continue;
    }
    f += dp * dp.transpose() / p;
  }
  return (f + f.transpose()) / 2;
}

RMat cfi_matrix(const Ensemble& ensemble, const Povm& povm, const DerivativeSet& derivs) {
  const auto n = Eigen::Index(derivs.size());
  RMat f = RMat::Zero(n, n);
  double total = 0;
  for (const auto& [q, rho] : ensemble) {
    if (q < 0) throw Error("cfi_matrix: negative ensemble weight");
    total += q;
    if (q > 0) f += q * cfi_matrix(rho, povm, derivs);
  }
  if (std::abs(total - 1) > 1e-9) throw Error("cfi_matrix: ensemble weights do not sum to one");
  return f;
}

CfiMaxResult cfi_ascent(const Povm& povm, const std::vector<Mat>& dpi, Vec psi, double grad_tol,
                        int max_iter) {
  psi /= psi.norm();
  PureEval cur = pure_cfi(povm, dpi, psi, true);
  CfiMaxResult out;
  if (!cur.valid) return out;
  double step = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    Vec g = cur.grad - psi * psi.dot(cur.grad);
    double gn = g.norm();
    if (gn <= grad_tol * std::max(1.0, cur.value)) {
      out.converged = true;
      break;
    }
    bool moved = false;
    step = std::min(step * 4, 1e6 / gn);
    while (step * gn > 1e-15) {
      Vec cand = psi + step * g;
      cand /= cand.norm();
      PureEval next = pure_cfi(povm, dpi, cand, true);
      if (next.valid && next.value >= cur.value + 1e-4 * step * gn * gn) {
        psi = cand;
        cur = next;
        moved = true;
        break;
      }
      step /= 2;
    }
    if (!moved) {
      // No ascent possible at double precision: stationary to rounding.
      out.converged = true;
      break;
    }
  }
  out.value = cur.value;
  out.probe = psi;
  return out;
}

bool is_diagonal_model(const Povm& povm, const DerivativeSet& derivs, double tol) {
  auto offdiag = [tol](const Mat& m) {
    Mat o = m;
    o.diagonal().setZero();
    return max_abs(o) <= tol;
  };
  for (const auto& e : povm)
    if (!offdiag(e)) return false;
  for (const auto& set : derivs)
    for (const auto& e : set)
      if (!offdiag(e)) return false;
  return true;
}

CfiMaxResult cfi_max_probe(const Povm& povm, const std::vector<Mat>& dpi, const CfiMaxOptions& opts) {
  const int d = int(povm.front().rows());
  CfiMaxResult best;
  std::vector<Vec> starts;

  if (is_diagonal_model(povm, {dpi})) {
    for (int i = 0; i < d; ++i) {
      Vec e = Vec::Zero(d);
      e(i) = 1;
      double v = safe_pure_cfi(povm, dpi, e);
      if (v >= 0) keep_best(best, {v, e, true});
    }
  }

  // Spectral structure of the SLDs gives informed starting points.
  try {
    std::vector<Mat> slds;
    for (std::size_t j = 0; j < povm.size(); ++j) slds.push_back(sld_eig(povm[j], dpi[j]));
    auto eq = hermitian_eig(q_operator(slds, povm));
    for (int i = 0; i < d; ++i) starts.push_back(eq.vectors.col(i));
    for (const auto& l : slds) {
      auto el = hermitian_eig(l);
      for (int i = 0; i < d; ++i) starts.push_back(el.vectors.col(i));
    }
  } catch (const Error&) {
  }

  if (d == 2) {
    const int n = std::max(2, opts.grid);
    std::vector<std::pair<double, Vec>> top;
    for (int a = 0; a < n; ++a) {
      double th = std::numbers::pi * a / (n - 1);
      for (int b = 0; b < n; ++b) {
        double ph = 2 * std::numbers::pi * b / n;
        Vec psi = bloch_vector(th, ph);
        double v = safe_pure_cfi(povm, dpi, psi);
        if (v < 0) continue;
        if (top.size() < 4 || v > top.back().first) {
          top.emplace_back(v, psi);
          std::sort(top.begin(), top.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
          if (top.size() > 4) top.pop_back();
        }
      }
    }
    for (auto& t : top) starts.push_back(t.second);
  } else {
    std::mt19937_64 rng(opts.seed);
    for (int r = 0; r < opts.restarts; ++r) starts.push_back(haar_vector(d, rng));
  }

  for (const auto& s : starts) keep_best(best, cfi_ascent(povm, dpi, s, opts.grad_tol, opts.max_iter));
  return best;
}

CfiMaxResult cfi_max_probe(const DetectorModel& model, const RVec& theta, int k, const CfiMaxOptions& opts) {
  Povm povm = model.povm(theta);
  DerivativeSet derivs = model.derivatives(theta);
  return cfi_max_probe(povm, derivs.at(k), opts);
}

double trace_dqfi(const std::vector<Mat>& slds, const Povm& povm) {
  double t = 0;
  for (std::size_t j = 0; j < povm.size(); ++j) t += (slds[j] * povm[j] * slds[j]).trace().real();
  return t;
}

AttainabilityReport attainability_check(const std::vector<Mat>& slds, const Povm& povm, const Mat& q) {
  AttainabilityReport rep;
  const auto d = q.rows();
  auto eq = hermitian_eig(q);
  const double top = eq.values(d - 1);
  const double scale = std::max(1.0, std::abs(top));

  for (std::size_t a = 0; a < slds.size(); ++a)
    for (std::size_t b = a + 1; b < slds.size(); ++b)
      rep.commutator_norm = std::max(rep.commutator_norm, max_abs(Mat(slds[a] * slds[b] - slds[b] * slds[a])));

  std::vector<Eigen::Index> top_idx;
  for (Eigen::Index i = 0; i < d; ++i)
    if (top - eq.values(i) <= 1e-8 * scale) top_idx.push_back(i);
  Mat topspace(d, Eigen::Index(top_idx.size()));
  for (std::size_t c = 0; c < top_idx.size(); ++c) topspace.col(Eigen::Index(c)) = eq.vectors.col(top_idx[c]);

  std::vector<Vec> cands;
  for (Eigen::Index c = 0; c < topspace.cols(); ++c) cands.push_back(topspace.col(c));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    Mat g = Mat::Zero(d, d);
    for (const auto& l : slds) g += normal(rng) * l;
    auto eg = hermitian_eig(hermitian_part(g));
    for (Eigen::Index i = 0; i < d; ++i) cands.push_back(eg.vectors.col(i));
    if (topspace.cols() > 1) {
      auto er = hermitian_eig(hermitian_part(Mat(topspace.adjoint() * g * topspace)));
      for (Eigen::Index i = 0; i < er.vectors.cols(); ++i) cands.push_back(topspace * er.vectors.col(i));
    }
  }
  for (const auto& l : slds) {
    auto el = hermitian_eig(l);
    for (Eigen::Index i = 0; i < d; ++i) cands.push_back(el.vectors.col(i));
  }

  struct Score {
    double real_res, eig_res, top_res;
  };
  auto score = [&](const Vec& v) {
    Score s{0, 0, 0};
    for (std::size_t j = 0; j < slds.size(); ++j) {
      cplx t = v.dot(slds[j] * povm[j] * v);
      s.real_res = std::max(s.real_res, std::abs(t.imag()));
      Vec lv = slds[j] * v;
      cplx lam = v.dot(lv);
      s.eig_res = std::max(s.eig_res, (lv - lam * v).norm());
    }
    s.top_res = top - v.dot(q * v).real();
    return s;
  };

  const double tol = 1e-7;
  int best = -1, best_common = -1;
  double best_key = std::numeric_limits<double>::infinity(), best_common_top = best_key;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    Vec v = cands[i] / cands[i].norm();
    cands[i] = v;
    Score s = score(v);
    double key = std::max({s.real_res, s.eig_res, s.top_res / scale});
    if (key < best_key) {
      best_key = key;
      best = int(i);
    }
    if (s.eig_res <= tol && s.top_res < best_common_top) {
      best_common_top = s.top_res;
      best_common = int(i);
    }
  }

  rep.common_eigvec_found = best_common >= 0;
  int chosen = best_common >= 0 && best_common_top <= tol * scale ? best_common : best;
  if (chosen < 0) chosen = 0;
  rep.candidate = cands[chosen];
  Score s = score(rep.candidate);
  rep.real_traces_residual = s.real_res;
  rep.real_traces = s.real_res <= tol;
  rep.common_eigvec_residual = s.eig_res;
  rep.common_eigvec = s.eig_res <= tol;
  rep.top_q_residual = s.top_res;
  rep.top_q = s.top_res <= tol * scale;
  rep.attainable = rep.real_traces && rep.common_eigvec && rep.top_q;
  return rep;
}

SpectralDqfi spectral_dqfi(const std::vector<Mat>& slds, const Povm& povm) {
  Mat q = q_operator(slds, povm);
  auto e = hermitian_eig(q);
  const auto d = q.rows();
  SpectralDqfi out;
  out.value = e.values(d - 1);
  out.probe = e.vectors.col(d - 1);
  out.gap = d > 1 ? e.values(d - 1) - e.values(d - 2) : std::numeric_limits<double>::infinity();
  out.degenerate = out.gap < 1e-8 * std::max(1.0, out.value);
  if (out.degenerate) {
    AttainabilityReport rep = attainability_check(slds, povm, q);
    if (rep.common_eigvec && rep.top_q) out.probe = rep.candidate;
  }
  return out;
}

OrderingReport ordering_check(double j_trace, double j_spectral, double d) {
  OrderingReport r;
  const double tol = 1e-8 * std::max(1.0, std::abs(j_trace));
  r.lower_margin = j_spectral - j_trace / d;
  r.middle_margin = j_trace - j_spectral;
  r.upper_margin = d * j_spectral - j_trace;
  r.ok = r.lower_margin >= -tol && r.middle_margin >= -tol && r.upper_margin >= -tol;
  return r;
}

RMat dqfi_matrix_trace(const SldSet& slds, const Povm& povm) {
  const int n = slds.params();
  RMat j = RMat::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      double s = 0;
      for (std::size_t l = 0; l < povm.size(); ++l) {
        const Mat& la = slds.param(a)[l];
        const Mat& lb = slds.param(b)[l];
        s += 0.5 * (la * povm[l] * lb + lb * povm[l] * la).trace().real();
      }
      j(a, b) = j(b, a) = s;
    }
  }
  return j;
}

double trace_qcrb(const RMat& jt, const RMat& W) {
  Eigen::SelfAdjointEigenSolver<RMat> es(jt);
  if (es.eigenvalues().minCoeff() <= 1e-12) {
    throw Error("trace_qcrb: information matrix is singular (insufficient parameter information)");
  }
  RMat inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  if (W.size() == 0) return inv.trace();
  if (W.rows() != jt.rows() || W.cols() != jt.cols()) throw DimensionError("trace_qcrb: weight size mismatch");
  return (W * inv).trace();
}

double gill_massar_qcrb(const RMat& jt) {
  Eigen::SelfAdjointEigenSolver<RMat> es(jt);
  if (es.eigenvalues().minCoeff() <= 1e-12) {
    throw Error("gill_massar_qcrb: information matrix is singular");
  }
  double t = es.eigenvalues().cwiseInverse().cwiseSqrt().sum();
  return t * t;
}

SequentialBound sequential_bound(const RVec& j) {
  if (j.size() == 0) throw Error("sequential_bound: empty input");
  if (j.minCoeff() <= 0) throw Error("sequential_bound: every single-parameter DQFI must be positive");
  SequentialBound out;
  RVec r = j.cwiseSqrt().cwiseInverse();
  out.sequential = r.sum() * r.sum();
  out.weights = r / r.sum();
  out.total_qfi = double(j.size() * j.size()) / j.sum();
  return out;
}

double state_qfi(const Mat& rho, const Mat& drho) {
  require_hermitian(rho, "state_qfi");
  if (std::abs(rho.trace().real() - 1) > 1e-9) throw Error("state_qfi: state is not normalised");
  if (std::abs(drho.trace()) > 1e-9) throw Error("state_qfi: state derivative is not traceless");
  Mat l = sld_eig(rho, drho);
  return (rho * l * l).trace().real();
}

}  // namespace detbound
