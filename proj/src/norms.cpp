#include "ck/norms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ck/error.hpp"

namespace ck {

namespace {

std::vector<std::size_t> descending_order(const std::vector<double>& f) {
  std::vector<std::size_t> idx(f.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return f[a] > f[b]; });
  return idx;
}

}  // namespace

double lp_norm(const std::vector<double>& f, const std::vector<double>& w, double p) {
  if (!(p >= 1.0)) throw Error(Errc::BadExponent, "L^p needs p >= 1");
  if (std::isinf(p)) {
    double m = 0.0;
    for (double x : f) m = std::max(m, std::abs(x));
    return m;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * std::pow(std::abs(f[i]), p);
  return std::pow(s, 1.0 / p);
}

double lp_norm(const FormField& a, double p) { return lp_norm(pointwise_norm(a), a.patch->weights(), p); }

double lp_norm(const ScalarField& f, double p) { return lp_norm(f.v, f.patch->weights(), p); }

double lorentz_quasinorm(const std::vector<double>& f, const std::vector<double>& w, double s, double theta) {
  if (!(s > 1.0) || std::isinf(s) || !(theta >= 1.0) || std::isinf(theta))
    throw Error(Errc::BadExponent, "Lorentz exponents need s in (1,inf), theta in [1,inf)");
  std::vector<double> a(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) a[i] = std::abs(f[i]);
  auto idx = descending_order(a);
  // on (v_{k+1}, v_k] the distribution function equals W_k, the weight of the
  // top k samples
  double sum = 0.0, W = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    W += w[idx[k]];
    double vk = a[idx[k]];
    double vn = k + 1 < idx.size() ? a[idx[k + 1]] : 0.0;
    if (vk > vn) sum += std::pow(W, theta / s) * (std::pow(vk, theta) - std::pow(vn, theta)) / theta;
  }
  return std::pow(sum, 1.0 / theta);
}

double lorentz_quasinorm(const FormField& a, double s, double theta) {
  return lorentz_quasinorm(pointwise_norm(a), a.patch->weights(), s, theta);
}

double max_mass(const std::vector<double>& f, const std::vector<double>& w, double volume) {
  std::vector<double> a(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) a[i] = std::abs(f[i]);
  auto idx = descending_order(a);
  double left = volume, mass = 0.0;
  for (std::size_t i : idx) {
    if (left <= 0.0) break;
    double take = std::min(left, w[i]);
    mass += take * a[i];
    left -= take;
  }
  return mass;
}

std::vector<EquiintegrabilityRow> equiintegrability_profile(const std::vector<ScalarField>& seq,
                                                            const std::vector<double>& fractions) {
  if (seq.empty()) throw Error(Errc::EmptySequence, "equiintegrability profile of an empty sequence");
  const auto& base = *seq.front().patch;
  for (const auto& f : seq)
    if (!f.patch->same_as(base)) throw Error(Errc::ChartMismatch, "sequence members on different grids");
  double vol = 0.0;
  for (double w : base.weights()) vol += w;
  std::vector<EquiintegrabilityRow> rows;
  for (double d : fractions) {
    EquiintegrabilityRow r;
    r.fraction = d;
    for (std::size_t k = 0; k < seq.size(); ++k) {
      double m = max_mass(seq[k].v, base.weights(), d * vol);
      if (r.argmax < 0 || m > r.mass) {
        r.mass = m;
        r.argmax = static_cast<int>(k);
      }
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace ck
