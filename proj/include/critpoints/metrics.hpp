#pragma once

// Distances between point sets and measures, and root/critical-point pairing
// diagnostics.

#include <algorithm>
#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/push_relabel_max_flow.hpp>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "critpoints/errors.hpp"
#include "critpoints/measures.hpp"
#include "critpoints/polyroots.hpp"
#include "critpoints/precision.hpp"

namespace critpoints {

struct WeightedAtom {
  cplx location;
  double weight = 0.0;
};

/// Finitely supported probability measure; atoms at equal locations merged.
class DiscreteMeasure {
 public:
  explicit DiscreteMeasure(std::vector<WeightedAtom> atoms) {
    if (atoms.empty()) throw DomainError("DiscreteMeasure: no atoms");
    CompensatedSum total;
    for (const auto& a : atoms) {
      if (!(a.weight > 0.0) || !std::isfinite(a.weight))
        throw DomainError("DiscreteMeasure: weights must be positive and finite");
      if (!finite(a.location)) throw DomainError("DiscreteMeasure: location must be finite");
      total.add(a.weight);
    }
    if (std::abs(total.value() - 1.0) > 1e-12)
      throw DomainError("DiscreteMeasure: weights must sum to 1");
    atoms_ = merge(std::move(atoms));
  }

  /// Empirical measure (1/n) sum delta_{x_j}.
  static DiscreteMeasure empirical(std::span<const cplx> points) {
    if (points.empty()) throw DomainError("DiscreteMeasure: no atoms");
    const double w = 1.0 / static_cast<double>(points.size());
    std::vector<WeightedAtom> atoms;
    atoms.reserve(points.size());
    for (const cplx& p : points) {
      if (!finite(p)) throw DomainError("DiscreteMeasure: location must be finite");
      atoms.push_back({p, w});
    }
    DiscreteMeasure m;
    m.atoms_ = merge(std::move(atoms));
    return m;
  }

  const std::vector<WeightedAtom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }

 private:
  DiscreteMeasure() = default;

  static std::vector<WeightedAtom> merge(std::vector<WeightedAtom> atoms) {
    std::stable_sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) {
      if (a.location.real() != b.location.real()) return a.location.real() < b.location.real();
      return a.location.imag() < b.location.imag();
    });
    std::vector<WeightedAtom> out;
    for (const auto& a : atoms) {
      if (!out.empty() && out.back().location == a.location)
        out.back().weight += a.weight;
      else
        out.push_back(a);
    }
    return out;
  }

  std::vector<WeightedAtom> atoms_;
};

namespace detail {

/// Max-flow value, as a fraction of total mass, of the bipartite transport
/// network whose middle edges join atoms at distance <= eps.
class CouplingNetwork {
 public:
  CouplingNetwork(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol)
      : x_(mu.atoms()), y_(nu.atoms()) {
    const double count = static_cast<double>(x_.size() + y_.size());
    // Capacity rounding error is at most count / (2 scale); keep it under tol/4.
    scale_ = std::min(std::max(1e12, 2.0 * count / tol), 0x1p52);
    for (const auto& a : x_) cx_.push_back(std::llround(a.weight * scale_));
    for (const auto& b : y_) cy_.push_back(std::llround(b.weight * scale_));
    long long sx = 0, sy = 0;
    for (long long c : cx_) sx += c;
    for (long long c : cy_) sy += c;
    total_ = static_cast<double>(std::max(sx, sy));
    big_ = std::max(sx, sy) + 1;
  }

  double distance(std::size_t i, std::size_t j) const {
    return std::abs(x_[i].location - y_[j].location);
  }
  std::size_t left() const { return x_.size(); }
  std::size_t right() const { return y_.size(); }

  struct Pair {
    double d;
    std::uint32_t i;
    std::uint32_t j;
  };

  /// All pairs at distance <= eps, sorted by distance.
  std::vector<Pair> pairs_within(double eps) const {
    std::vector<Pair> out;
    for (std::size_t i = 0; i < x_.size(); ++i)
      for (std::size_t j = 0; j < y_.size(); ++j) {
        const double d = distance(i, j);
        if (d <= eps)
          out.push_back({d, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
      }
    std::sort(out.begin(), out.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });
    return out;
  }

  /// Flow using every pair at distance <= eps.
  double flow(double eps) const {
    std::vector<Pair> edges;
    for (std::size_t i = 0; i < x_.size(); ++i)
      for (std::size_t j = 0; j < y_.size(); ++j)
        if (distance(i, j) <= eps)
          edges.push_back({0.0, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
    return flow(std::span<const Pair>(edges));
  }

  double flow(std::span<const Pair> edges) const {
    using Traits = boost::adjacency_list_traits<boost::vecS, boost::vecS, boost::directedS>;
    using Graph = boost::adjacency_list<
        boost::vecS, boost::vecS, boost::directedS, boost::no_property,
        boost::property<boost::edge_capacity_t, long long,
                        boost::property<boost::edge_residual_capacity_t, long long,
                                        boost::property<boost::edge_reverse_t,
                                                        Traits::edge_descriptor>>>>;
    const std::size_t nl = x_.size(), nr = y_.size();
    Graph g(nl + nr + 2);
    const std::size_t src = nl + nr, snk = nl + nr + 1;
    auto cap = boost::get(boost::edge_capacity, g);
    auto rev = boost::get(boost::edge_reverse, g);
    auto link = [&](std::size_t u, std::size_t v, long long c) {
      auto e = boost::add_edge(u, v, g).first;
      auto r = boost::add_edge(v, u, g).first;
      cap[e] = c;
      cap[r] = 0;
      rev[e] = r;
      rev[r] = e;
    };
    for (std::size_t i = 0; i < nl; ++i) link(src, i, cx_[i]);
    for (std::size_t j = 0; j < nr; ++j) link(nl + j, snk, cy_[j]);
    for (const Pair& p : edges) link(p.i, nl + p.j, big_);
    const long long f = boost::push_relabel_max_flow(g, src, snk);
    return static_cast<double>(f) / total_;
  }

 private:
  const std::vector<WeightedAtom>& x_;
  const std::vector<WeightedAtom>& y_;
  std::vector<long long> cx_, cy_;
  double scale_ = 1e12;
  double total_ = 1.0;
  long long big_ = 0;
};

}  // namespace detail

/// Prohorov distance between two discrete measures.
///
/// eps is feasible iff the transport network restricted to pairs at distance
/// <= eps carries flow >= 1 - eps. The flow M(eps) only changes at pairwise
/// distances, so once the bracket (lo, hi] holds a single distance D the
/// answer is 1 - M(lo) if that is below D, else max(D, 1 - M(D)).
/// The bracket comes from doubling eps, then safeguarded interpolation on
/// g = M - 1 + eps over the sorted distances inside it; only networks near
/// the answer are built. tol bounds the capacity rounding error.
inline double prohorov_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                double tol = 1e-9) {
  if (!(tol > 0.0)) throw DomainError("prohorov_distance: tol must be positive");
  using Pair = detail::CouplingNetwork::Pair;
  const detail::CouplingNetwork net(mu, nu, tol);

  double lo = 0.0;
  double flow_lo = net.flow(0.0);
  if (flow_lo >= 1.0) return 0.0;
  double hi = 1.0;
  double flow_hi = std::numeric_limits<double>::quiet_NaN();
  for (double e = 1.0 / 64.0; e < 1.0; e *= 2.0) {
    const double f = net.flow(e);
    if (f >= 1.0 - e) {
      hi = e;
      flow_hi = f;
      break;
    }
    lo = e;
    flow_lo = f;
  }

  const std::vector<Pair> pairs = net.pairs_within(hi);
  auto first_above = [&](double v) {
    return static_cast<std::size_t>(
        std::upper_bound(pairs.begin(), pairs.end(), v,
                         [](double x, const Pair& p) { return x < p.d; }) -
        pairs.begin());
  };
  // Distinct distances in (lo, hi] occupy pairs[a, b).
  std::size_t a = first_above(lo);
  std::size_t b = pairs.size();
  auto distinct_in_bracket = [&]() {
    return a < b && pairs[a].d != pairs[b - 1].d;  // at least two distinct values
  };
  bool bisect_next = std::isnan(flow_hi);
  while (distinct_in_bracket()) {
    std::size_t pick = a + (b - a - 1) / 2;
    if (!bisect_next) {
      const double g_lo = flow_lo - 1.0 + lo;
      const double g_hi = flow_hi - 1.0 + hi;
      const double v = lo + (hi - lo) * (-g_lo / (g_hi - g_lo));
      pick = std::clamp(first_above(v), a, b - 1);
    }
    // Test strictly below the largest distance so both outcomes shrink the bracket.
    const double top = pairs[b - 1].d;
    if (pairs[pick].d == top) {
      const auto first_top = static_cast<std::size_t>(
          std::lower_bound(pairs.begin() + static_cast<std::ptrdiff_t>(a),
                           pairs.begin() + static_cast<std::ptrdiff_t>(b), top,
                           [](const Pair& p, double x) { return p.d < x; }) -
          pairs.begin());
      pick = first_top - 1;
    }
    const double ev = pairs[pick].d;
    const std::size_t cut = first_above(ev);
    const double f = net.flow(std::span<const Pair>(pairs.data(), cut));
    const std::size_t before = b - a;
    if (f >= 1.0 - ev) {
      hi = ev;
      flow_hi = f;
      b = cut;
    } else {
      lo = ev;
      flow_lo = f;
      a = cut;
    }
    bisect_next = 2 * (b - a) > before;
  }
  // Between lo and the next distance the flow is flow_lo.
  const double next = a < b ? pairs[a].d : hi;
  const double candidate = std::max(lo, 1.0 - flow_lo);
  if (candidate < next) return std::min(candidate, 1.0);
  if (a >= b) return std::min(hi, 1.0);
  const double f = net.flow(std::span<const Pair>(pairs.data(), first_above(next)));
  return std::min(std::max(next, 1.0 - f), 1.0);
}

/// sup_x |F_n(x) - F(x)|, attained at a jump of F_n (either side).
inline double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw DomainError("ks_statistic: empty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return std::clamp(d, 0.0, 1.0);
}

/// V(z) = (1/n) sum 1/(z - X_j), accumulated at twice double precision.
inline cplx empirical_potential(std::span<const cplx> sample, cplx z) {
  if (sample.empty()) throw DomainError("empirical_potential: empty sample");
  return eval_log_derivative(RootPolynomial(sample, 53), z) / static_cast<double>(sample.size());
}

inline cplx empirical_potential(const RootSample& sample, cplx z) {
  return empirical_potential(std::span<const cplx>(sample.roots), z);
}

struct LowerModulus {
  double value = 0.0;
  cplx center;
  double radius = 0.0;
  /// Grid minimum refined by one Newton step: an upper bound on the infimum.
  bool grid_approximate = true;
};

/// min |V| over B_{C/n}(center), estimated on the center plus `grid` boundary
/// points and one Newton step toward a zero of V from the best of them.
inline LowerModulus lower_modulus(std::span<const cplx> sample, cplx center, double C,
                                  std::size_t grid = 64) {
  if (!(C > 0.0)) throw DomainError("lower_modulus: C must be positive");
  if (grid < 8) throw DomainError("lower_modulus: grid must be at least 8");
  if (sample.empty()) throw DomainError("lower_modulus: empty sample");
  const double n = static_cast<double>(sample.size());
  LowerModulus out{0.0, center, C / n, true};
  for (const cplx& x : sample)
    if (std::abs(x - center) <= out.radius) {
      out.grid_approximate = false;
      return out;
    }
  auto V = [&](cplx w, cplx* dV) {
    CompensatedComplexSum v, dv;
    for (const cplx& x : sample) {
      const cplx q = inverse(w - x);
      v.add(q);
      dv.add(-q * q);
    }
    if (dV) *dV = dv.value() / n;
    return v.value() / n;
  };
  cplx best = center;
  double best_val = std::abs(V(center, nullptr));
  for (std::size_t k = 0; k < grid; ++k) {
    const cplx w = center + std::polar(out.radius, 2.0 * std::numbers::pi *
                                                       static_cast<double>(k) /
                                                       static_cast<double>(grid));
    const double v = std::abs(V(w, nullptr));
    if (v < best_val) {
      best_val = v;
      best = w;
    }
  }
  cplx dV;
  const cplx v0 = V(best, &dV);
  if (dV != cplx(0.0, 0.0)) {
    cplx w = best - v0 / dV;
    const cplx off = w - center;
    if (std::abs(off) > out.radius) w = center + off * (out.radius / std::abs(off));
    if (finite(w)) best_val = std::min(best_val, std::abs(V(w, nullptr)));
  }
  out.value = best_val;
  return out;
}

inline LowerModulus lower_modulus(const RootSample& sample, cplx center, double C,
                                  std::size_t grid = 64) {
  return lower_modulus(std::span<const cplx>(sample.roots), center, C, grid);
}

struct PairingReport {
  std::size_t n = 0;
  double C = 0.0;
  std::size_t matched = 0;
  std::size_t crowded = 0;
  std::size_t unmatched = 0;
  double max_match_dist = 0.0;

  double matched_fraction() const {
    return n == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(n);
  }
};

/// Classifies each root: crowded if another root lies within 2C/n, matched if
/// exactly one critical point lies in the open ball B_{C/n}(root), otherwise
/// unmatched.
inline PairingReport pairing_report(std::span<const cplx> roots, const CriticalPointSet& cps,
                                    double C) {
  if (!(C > 0.0)) throw DomainError("pairing_report: C must be positive");
  PairingReport rep;
  rep.n = roots.size();
  rep.C = C;
  const double n = static_cast<double>(roots.size());
  const double r = C / n;
  for (std::size_t j = 0; j < roots.size(); ++j) {
    bool crowded = false;
    for (std::size_t k = 0; k < roots.size() && !crowded; ++k)
      crowded = k != j && std::abs(roots[k] - roots[j]) < 2.0 * r;
    if (crowded) {
      ++rep.crowded;
      continue;
    }
    std::size_t hits = 0;
    double dist = 0.0;
    for (const cplx& a : cps.points) {
      const double d = std::abs(a - roots[j]);
      if (d < r) {
        ++hits;
        dist = d;
      }
    }
    if (hits == 1) {
      ++rep.matched;
      rep.max_match_dist = std::max(rep.max_match_dist, dist);
    } else {
      ++rep.unmatched;
    }
  }
  return rep;
}

inline PairingReport pairing_report(const RootSample& roots, const CriticalPointSet& cps,
                                    double C) {
  return pairing_report(std::span<const cplx>(roots.roots), cps, C);
}

/// min_{j < n} |X_j - X_n|: the last point plays the role of a fresh draw.
inline double min_gap_statistic(std::span<const cplx> sample) {
  if (sample.size() < 2) throw DomainError("min_gap_statistic: need at least two points");
  const cplx last = sample.back();
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + 1 < sample.size(); ++j) m = std::min(m, std::abs(sample[j] - last));
  return m;
}

inline double min_gap_statistic(const RootSample& sample) {
  return min_gap_statistic(std::span<const cplx>(sample.roots));
}

}  // namespace critpoints
