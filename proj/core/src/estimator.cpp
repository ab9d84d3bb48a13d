#include "stepdeconv/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "stepdeconv/error.hpp"
#include "stepdeconv/inference.hpp"

namespace stepdeconv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRankThreshold = 1e-10;
constexpr double kMinSeparation = 1e-8;

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 16, 16>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 16, 1>;
using Placement = std::vector<std::size_t>;

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

Eigen::MatrixXd design_matrix(const Dataset& data, const Kernel& k, std::span<const double> taus) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto cols = static_cast<Eigen::Index>(taus.size() + 1);
  Eigen::MatrixXd a(n, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const double lo = j == 0 ? -kInf : taus[j - 1];
    const double hi = j == cols - 1 ? kInf : taus[j];
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = delta_phi(k, data.x[i], lo, hi);
  }
  return a;
}

void check_taus(std::span<const double> taus) {
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0 && taus[i] < 1.0))
      throw ContractViolation("jump locations must lie strictly inside (0, 1)");
    if (i > 0 && !(taus[i] > taus[i - 1]))
      throw ContractViolation("jump locations must be strictly increasing");
  }
}

// Minimizes b'Gb - 2c'b over the box |b_j| <= bound by an active-set
// iteration started from the clipped unconstrained minimizer `b`.
SmallVector box_least_squares(const SmallMatrix& g, const SmallVector& c, SmallVector b, double bound) {
  const Eigen::Index m = g.rows();
  std::vector<bool> fixed(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    b[j] = std::clamp(b[j], -bound, bound);
    fixed[j] = std::abs(b[j]) == bound;
  }
  const double tol = 1e-13 * (g.diagonal().maxCoeff() * bound + c.cwiseAbs().maxCoeff());
  for (Eigen::Index iter = 0; iter < 10 * m + 10; ++iter) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index j = 0; j < m; ++j)
      if (!fixed[j]) free.push_back(j);
    if (!free.empty()) {
      const auto f = static_cast<Eigen::Index>(free.size());
      SmallMatrix gff(f, f);
      SmallVector rhs(f);
      for (Eigen::Index a = 0; a < f; ++a) {
        rhs[a] = c[free[a]];
        for (Eigen::Index j = 0; j < m; ++j)
          if (fixed[j]) rhs[a] -= g(free[a], j) * b[j];
        for (Eigen::Index q = 0; q < f; ++q) gff(a, q) = g(free[a], free[q]);
      }
      const SmallVector z = gff.ldlt().solve(rhs);
      if (!z.allFinite()) break;
      double alpha = 1.0;
      for (Eigen::Index a = 0; a < f; ++a) {
        const double cur = b[free[a]];
        if (z[a] > bound) alpha = std::min(alpha, (bound - cur) / (z[a] - cur));
        if (z[a] < -bound) alpha = std::min(alpha, (-bound - cur) / (z[a] - cur));
      }
      alpha = std::max(alpha, 0.0);
      for (Eigen::Index a = 0; a < f; ++a) b[free[a]] += alpha * (z[a] - b[free[a]]);
      if (alpha < 1.0) {
        for (Eigen::Index a = 0; a < f; ++a) {
          const Eigen::Index j = free[a];
          if (std::abs(b[j]) >= bound * (1.0 - 1e-14)) {
            b[j] = std::copysign(bound, b[j]);
            fixed[j] = true;
          }
        }
        continue;
      }
    }
    // Release the bound variable with the largest inward descent direction.
    const SmallVector grad = g * b - c;
    Eigen::Index release = -1;
    double worst = tol;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!fixed[j]) continue;
      const double v = b[j] > 0 ? grad[j] : -grad[j];
      if (v > worst) {
        worst = v;
        release = j;
      }
    }
    if (release < 0) break;
    fixed[release] = false;
  }
  return b;
}

std::size_t binomial_capped(std::size_t n, std::size_t k, std::size_t cap) {
  if (k > n) return 0;
  double c = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (c > static_cast<double>(cap)) return cap + 1;
  }
  return static_cast<std::size_t>(std::llround(c));
}

struct Scored {
  double rss;
  Placement placement;
  bool operator<(const Scored& o) const {
    if (rss != o.rss) return rss < o.rss;
    return placement < o.placement;
  }
};

// Keeps the `capacity` best placements under (rss, placement) order.
class TopList {
 public:
  explicit TopList(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}
  void offer(double rss, const Placement& p) {
    if (!std::isfinite(rss)) return;
    if (items_.size() == capacity_ && !(Scored{rss, p} < items_.back())) return;
    Scored s{rss, p};
    auto it = std::upper_bound(items_.begin(), items_.end(), s);
    items_.insert(it, std::move(s));
    if (items_.size() > capacity_) items_.pop_back();
  }
  const std::vector<Scored>& items() const { return items_; }

 private:
  std::size_t capacity_;
  std::vector<Scored> items_;
};

// Screening of grid placements through the Gram matrix of primitive columns
// P_g(x_i) = Psi(x_i - t_g). The column span of the design for jumps
// (t_g1 < ... < t_gk) equals span{1, P_g1, ..., P_gk}, so the residual sum of
// squares only needs the Gram entries of those columns. In that basis the
// coefficients are (b_1, b_2 - b_1, ..., b_{k+1} - b_k), which lets the
// sup-norm bound on the levels be imposed as in heights_given_jumps.
class GridScreen {
 public:
  GridScreen(const Dataset& data, const Kernel& k, std::span<const double> grid, bool full_gram, double bound)
      : n_(static_cast<double>(data.size())), bound_(bound) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto g = static_cast<Eigen::Index>(grid.size());
    columns_.resize(n, g + 1);
    columns_.col(0).setConstant(k.total_mass());
    for (Eigen::Index c = 0; c < g; ++c)
      for (Eigen::Index i = 0; i < n; ++i) columns_(i, c + 1) = k.primitive(data.x[i] - grid[c]);
    const auto y = as_vector(data.y);
    yy_ = y.squaredNorm();
    rhs_ = columns_.transpose() * y;
    if (full_gram) {
      gram_ = columns_.transpose() * columns_;
    } else {
      gram_.setZero(g + 1, g + 1);
      gram_.row(0) = columns_.col(0).transpose() * columns_;
      gram_.col(0) = gram_.row(0).transpose();
      for (Eigen::Index c = 1; c <= g; ++c) gram_(c, c) = columns_.col(c).squaredNorm();
    }
  }

  // Screening objective (rss / n) for grid indices p; +inf when singular.
  double score(const Placement& p) const {
    const auto m = static_cast<Eigen::Index>(p.size() + 1);
    SmallMatrix s(m, m);
    SmallVector r(m);
    auto idx = [&](Eigen::Index j) { return j == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(p[j - 1] + 1); };
    for (Eigen::Index a = 0; a < m; ++a) {
      r[a] = rhs_[idx(a)];
      for (Eigen::Index b = 0; b < m; ++b) s(a, b) = gram_(idx(a), idx(b));
    }
    Eigen::LLT<SmallMatrix> llt(s);
    if (llt.info() != Eigen::Success) return kInf;
    SmallVector beta = llt.solve(r);
    // Tiny pivots mean the columns are collinear at grid resolution.
    const SmallVector diag = llt.matrixL().toDenseMatrix().diagonal();
    if (diag.minCoeff() <= 1e-7 * diag.maxCoeff()) return kInf;
    double rss = yy_ - r.dot(beta);
    SmallVector levels(m);
    double raw = 0.0;
    for (Eigen::Index a = 0; a < m; ++a) levels[a] = raw += beta[a];
    if (levels.cwiseAbs().maxCoeff() > bound_) {
      // Same problem in level coordinates: beta = D b with D the first
      // difference operator.
      SmallMatrix d = SmallMatrix::Identity(m, m);
      for (Eigen::Index a = 1; a < m; ++a) d(a, a - 1) = -1.0;
      const SmallMatrix gl = d.transpose() * s * d;
      const SmallVector cl = d.transpose() * r;
      const SmallVector b = box_least_squares(gl, cl, levels, bound_);
      rss = yy_ - 2.0 * cl.dot(b) + b.dot(gl * b);
    }
    if (!std::isfinite(rss)) return kInf;
    return std::max(rss, 0.0) / n_;
  }

 private:
  double n_;
  double bound_;
  double yy_ = 0.0;
  Eigen::MatrixXd columns_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd rhs_;
};

void enumerate_placements(std::size_t grid, std::size_t k, Placement& current, std::size_t start,
                          const GridScreen& screen, TopList& top, std::size_t& count) {
  if (current.size() == k) {
    top.offer(screen.score(current), current);
    ++count;
    return;
  }
  const std::size_t remaining = k - current.size();
  for (std::size_t g = start; g + remaining <= grid; ++g) {
    current.push_back(g);
    enumerate_placements(grid, k, current, g + 1, screen, top, count);
    current.pop_back();
  }
}

// Greedy insertion from a seed jump followed by single-jump relocation
// sweeps until no move improves the screening objective.
Scored greedy_from(std::size_t seed, std::size_t grid, std::size_t k, const GridScreen& screen,
                   std::size_t& count) {
  Placement cur{seed};
  double cur_score = screen.score(cur);
  ++count;
  while (cur.size() < k) {
    double best = kInf;
    Placement best_p;
    for (std::size_t g = 0; g < grid; ++g) {
      if (std::binary_search(cur.begin(), cur.end(), g)) continue;
      Placement p = cur;
      p.insert(std::upper_bound(p.begin(), p.end(), g), g);
      const double s = screen.score(p);
      ++count;
      if (s < best) {
        best = s;
        best_p = std::move(p);
      }
    }
    if (best_p.empty()) break;
    cur = std::move(best_p);
    cur_score = best;
  }
  if (cur.size() < k) return {kInf, cur};
  for (int sweep = 0; sweep < 50; ++sweep) {
    bool improved = false;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const std::size_t lo = i == 0 ? 0 : cur[i - 1] + 1;
      const std::size_t hi = i + 1 == cur.size() ? grid : cur[i + 1];
      for (std::size_t g = lo; g < hi; ++g) {
        if (g == cur[i]) continue;
        Placement p = cur;
        p[i] = g;
        const double s = screen.score(p);
        ++count;
        if (s < cur_score) {
          cur_score = s;
          cur = std::move(p);
          improved = true;
        }
      }
    }
    if (!improved) break;
  }
  return {cur_score, cur};
}

// Profile objective in the jump locations with bookkeeping for refinement.
class Profile {
 public:
  Profile(const Dataset& data, const Kernel& k, double bound) : data_(data), kernel_(k), bound_(bound) {}

  // rss for taus, +inf if the configuration is degenerate.
  double objective(std::span<const double> taus) const {
    try {
      return heights_given_jumps(data_, kernel_, taus, bound_).rss;
    } catch (const DegenerateFit&) {
      return kInf;
    }
  }

 private:
  const Dataset& data_;
  const Kernel& kernel_;
  double bound_;
};

struct Bounds {
  double lo, hi;
};

// Feasible interval for coordinate i keeping the jumps ordered.
Bounds coordinate_bounds(const std::vector<double>& taus, std::size_t i, Bounds domain) {
  const double lo = i == 0 ? domain.lo : taus[i - 1] + kMinSeparation;
  const double hi = i + 1 == taus.size() ? domain.hi : taus[i + 1] - kMinSeparation;
  return {lo, hi};
}

// One-dimensional minimization on [lo, hi]: a coarse scan picks the best
// sub-bracket, then golden-section search narrows it to `tol`.
std::pair<double, double> scan_golden(const std::function<double(double)>& f, double lo, double hi,
                                      double tol) {
  constexpr int kScan = 9;
  double best_x = lo, best_f = kInf;
  const double step = (hi - lo) / (kScan - 1);
  for (int s = 0; s < kScan; ++s) {
    const double x = s == kScan - 1 ? hi : lo + s * step;
    const double v = f(x);
    if (v < best_f) {
      best_f = v;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - step), b = std::min(hi, best_x + step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  for (auto [x, v] : {std::pair{c, fc}, std::pair{d, fd}}) {
    if (v < best_f) {
      best_f = v;
      best_x = x;
    }
  }
  return {best_x, best_f};
}

struct RefineOutcome {
  std::vector<double> taus;
  double objective;
  std::size_t iterations = 0;
  bool boundary = false;
};

// Gauss-Newton steps on the full parameter vector with Jacobian rows nu(x_i),
// line-searched on the profile objective. Only strict decreases are kept.
void gauss_newton(const Dataset& data, const Kernel& k, const Profile& profile, double bound,
                  Bounds domain, const FitConfig& cfg, RefineOutcome& st) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto y = as_vector(data.y);
  for (std::size_t it = 0; it < cfg.max_refine_iters; ++it) {
    ++st.iterations;
    HeightsFit h;
    try {
      h = heights_given_jumps(data, k, st.taus, bound);
    } catch (const DegenerateFit&) {
      return;
    }
    StepFunction f;
    try {
      f = StepFunction(h.levels, st.taus);
    } catch (const ContractViolation&) {
      return;
    }
    if (f.num_jumps() != st.taus.size()) return;  // a zero-height jump carries no gradient
    const auto p = static_cast<Eigen::Index>(2 * st.taus.size() + 1);
    Eigen::MatrixXd jac(n, p);
    Eigen::VectorXd resid(n);
    try {
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd row = nu_vector(k, f, data.x[i]);
        jac.row(i) = row.transpose();
        double g = 0.0;
        for (std::size_t j = 0; j < h.levels.size(); ++j) g += h.levels[j] * row[static_cast<Eigen::Index>(2 * j)];
        resid[i] = y[i] - g;
      }
    } catch (const DomainError&) {
      return;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
    qr.setThreshold(kRankThreshold);
    const Eigen::VectorXd delta = qr.solve(resid);
    std::vector<double> dir(st.taus.size());
    for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = delta[static_cast<Eigen::Index>(2 * i + 1)];
    if (!std::all_of(dir.begin(), dir.end(), [](double v) { return std::isfinite(v); })) return;

    double step = 1.0;
    bool accepted = false;
    double moved = 0.0;
    for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
      std::vector<double> trial(st.taus);
      bool clipped = false;
      for (std::size_t i = 0; i < trial.size(); ++i) {
        trial[i] += step * dir[i];
        if (trial[i] < domain.lo) { trial[i] = domain.lo; clipped = true; }
        if (trial[i] > domain.hi) { trial[i] = domain.hi; clipped = true; }
      }
      bool ordered = true;
      for (std::size_t i = 1; i < trial.size(); ++i) ordered = ordered && trial[i] - trial[i - 1] >= kMinSeparation;
      if (!ordered) continue;
      const double v = profile.objective(trial);
      if (v < st.objective) {
        moved = 0.0;
        for (std::size_t i = 0; i < trial.size(); ++i) moved = std::max(moved, std::abs(trial[i] - st.taus[i]));
        st.taus = std::move(trial);
        st.objective = v;
        st.boundary = st.boundary || clipped;
        accepted = true;
        break;
      }
    }
    if (!accepted || moved < cfg.refine_tol) return;
  }
}

// Coordinate-wise scan + golden-section for kernels with jumps, where the
// profile objective is only piecewise smooth in the jump locations.
void coordinate_search(const Profile& profile, Bounds domain, double width, const FitConfig& cfg,
                       RefineOutcome& st) {
  double radius = width;
  for (std::size_t sweep = 0; sweep < cfg.max_refine_iters; ++sweep) {
    ++st.iterations;
    double max_move = 0.0;
    for (std::size_t i = 0; i < st.taus.size(); ++i) {
      const Bounds cb = coordinate_bounds(st.taus, i, domain);
      const double lo = std::max(cb.lo, st.taus[i] - radius);
      const double hi = std::min(cb.hi, st.taus[i] + radius);
      if (!(hi > lo)) continue;
      std::vector<double> work(st.taus);
      auto f = [&](double t) {
        work[i] = t;
        return profile.objective(work);
      };
      const auto [x, v] = scan_golden(f, lo, hi, cfg.refine_tol);
      if (v < st.objective) {
        max_move = std::max(max_move, std::abs(x - st.taus[i]));
        st.taus[i] = x;
        st.objective = v;
        if (x <= domain.lo || x >= domain.hi) st.boundary = true;
      }
    }
    if (max_move < cfg.refine_tol) return;
    radius = std::max(2.0 * max_move, 10.0 * cfg.refine_tol);
  }
}

FitResult finish(const Dataset& data, const Kernel& k, const FitConfig& cfg, std::vector<double> taus,
                 FitDiagnostics diag) {
  const HeightsFit h = heights_given_jumps(data, k, taus, cfg.bound);
  std::vector<double> theta;
  for (std::size_t j = 0; j < h.levels.size(); ++j) {
    theta.push_back(h.levels[j]);
    if (j < taus.size()) theta.push_back(taus[j]);
  }
  FitResult r;
  r.theta_hat = ThetaVector(std::move(theta));
  r.k_hat = taus.size();
  r.objective = h.rss;
  r.penalized_objective = h.rss;
  const double n = static_cast<double>(data.size());
  const double dof = n - static_cast<double>(2 * taus.size() + 1);
  r.sigma2_hat = dof > 0 ? h.rss * n / dof : std::numeric_limits<double>::quiet_NaN();
  diag.levels_clipped = h.clipped;
  r.diagnostics = std::move(diag);
  return r;
}

}  // namespace

HeightsFit heights_given_jumps(const Dataset& data, const Kernel& k, std::span<const double> taus,
                               double bound) {
  check_taus(taus);
  if (data.size() == 0) throw ContractViolation("empty dataset");
  if (data.x.size() != data.y.size()) throw ContractViolation("dataset x and y lengths differ");
  const Eigen::MatrixXd a = design_matrix(data, k, taus);
  const auto y = as_vector(data.y);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < a.cols()) throw DegenerateFit("design matrix is rank deficient for these jumps");
  Eigen::VectorXd b = qr.solve(y);
  HeightsFit out;
  if (b.cwiseAbs().maxCoeff() > bound) {
    const SmallMatrix g = a.transpose() * a;
    const SmallVector c = a.transpose() * y;
    b = box_least_squares(g, c, b, bound);
    out.clipped = true;
  }
  out.levels.assign(b.data(), b.data() + b.size());
  out.rss = (a * b - y).squaredNorm() / static_cast<double>(data.size());
  return out;
}

std::size_t default_grid_points(std::size_t n) {
  return static_cast<std::size_t>(std::ceil(4.0 * std::sqrt(static_cast<double>(n))));
}

std::vector<double> jump_grid(const Dataset& data, std::size_t grid_points) {
  if (data.size() < 2) throw ContractViolation("jump grid needs at least two design points");
  const double lo = std::max(data.x.front(), 0.0);
  const double hi = std::min(data.x.back(), 1.0);
  if (!(hi > lo)) throw ContractViolation("jump grid needs distinct design points");
  std::vector<double> grid(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g)
    grid[g] = lo + (static_cast<double>(g) + 0.5) * (hi - lo) / static_cast<double>(grid_points);
  return grid;
}

FitResult fit_known_k(const Dataset& data, const Kernel& k, std::size_t num_jumps, const FitConfig& cfg,
                      std::span<const double> warm_start) {
  data.validate();
  if (!(cfg.bound > 0.0)) throw ContractViolation("sup-norm bound R must be positive");
  const std::size_t n = data.size();
  if (n < 2 * num_jumps + 1) throw ContractViolation("need n >= 2k+1 observations for k jumps");
  if (num_jumps + 1 > 16) throw ContractViolation("at most 15 jumps are supported");

  FitDiagnostics diag;
  if (num_jumps == 0) {
    diag.search = "none";
    FitResult r = finish(data, k, cfg, {}, diag);
    r.diagnostics.grid_optimum = r.objective;
    return r;
  }

  const std::size_t grid_points = cfg.grid_points == 0 ? default_grid_points(n) : cfg.grid_points;
  if (grid_points < num_jumps + 1) throw ContractViolation("grid_points must be at least k+1");
  const auto grid = jump_grid(data, grid_points);
  const std::size_t placements = binomial_capped(grid_points, num_jumps, cfg.exhaustive_budget);
  const bool exhaustive = num_jumps <= 2 || placements <= cfg.exhaustive_budget;
  const GridScreen screen(data, k, grid, num_jumps >= 2, cfg.bound);

  TopList top(cfg.rescore_top);
  std::size_t count = 0;
  if (exhaustive) {
    diag.search = "exhaustive";
    Placement cur;
    enumerate_placements(grid_points, num_jumps, cur, 0, screen, top, count);
  } else {
    diag.search = "greedy";
    TopList seeds(cfg.multistarts);
    for (std::size_t g = 0; g < grid_points; ++g) {
      seeds.offer(screen.score({g}), {g});
      ++count;
    }
    for (const auto& s : seeds.items()) {
      auto r = greedy_from(s.placement.front(), grid_points, num_jumps, screen, count);
      top.offer(r.rss, r.placement);
    }
  }
  diag.candidates = count;

  // Exact re-scoring of the screened placements; ties go to the
  // lexicographically smallest placement.
  const Profile profile(data, k, cfg.bound);
  double best = kInf;
  std::vector<double> best_taus;
  for (const auto& s : top.items()) {
    std::vector<double> taus;
    for (std::size_t g : s.placement) taus.push_back(grid[g]);
    const double v = profile.objective(taus);
    if (v < best) {
      best = v;
      best_taus = std::move(taus);
    }
  }
  if (warm_start.size() + 1 == num_jumps) {
    for (double t : grid) {
      std::vector<double> taus(warm_start.begin(), warm_start.end());
      if (std::any_of(taus.begin(), taus.end(), [&](double w) { return std::abs(w - t) < kMinSeparation; }))
        continue;
      taus.insert(std::upper_bound(taus.begin(), taus.end(), t), t);
      const double v = profile.objective(taus);
      ++diag.candidates;
      if (v < best) {
        best = v;
        best_taus = std::move(taus);
      }
    }
  }
  if (best_taus.empty()) throw EstimationFailed("every candidate jump placement is degenerate");
  diag.grid_optimum = best;

  if (cfg.refine) {
    const Bounds domain{std::max(data.x.front(), 1e-12), std::min(data.x.back(), 1.0 - 1e-12)};
    const double spacing = (grid.size() > 1 ? grid[1] - grid[0] : (domain.hi - domain.lo));
    RefineOutcome st{best_taus, best, 0, false};
    if (k.has_jumps()) coordinate_search(profile, domain, spacing, cfg, st);
    gauss_newton(data, k, profile, cfg.bound, domain, cfg, st);
    diag.refine_iters = st.iterations;
    diag.boundary_clipped = st.boundary;
    best_taus = std::move(st.taus);
  }
  return finish(data, k, cfg, std::move(best_taus), std::move(diag));
}

double select_lambda(std::size_t n, double epsilon, double c) {
  if (n < 2) throw ContractViolation("select_lambda needs n >= 2");
  if (!(epsilon > 0.0) || !(c > 0.0)) throw ContractViolation("select_lambda needs epsilon > 0 and c > 0");
  const double dn = static_cast<double>(n);
  return c * std::log(dn) * std::pow(dn, -1.0 / (1.0 + epsilon));
}

double difference_variance(std::span<const double> y) {
  if (y.size() < 2) throw ContractViolation("difference variance needs at least two observations");
  double s = 0.0;
  for (std::size_t i = 1; i < y.size(); ++i) s += (y[i] - y[i - 1]) * (y[i] - y[i - 1]);
  return s / (2.0 * static_cast<double>(y.size() - 1));
}

FitResult fit_penalized(const Dataset& data, const Kernel& k, const FitConfig& cfg) {
  data.validate();
  double lambda;
  if (cfg.lambda) {
    lambda = *cfg.lambda;
  } else {
    const double c = cfg.lambda_c ? *cfg.lambda_c : 0.5 * difference_variance(data.y);
    lambda = c > 0.0 ? select_lambda(data.size(), cfg.epsilon, c) : 0.0;
  }
  if (!(lambda >= 0.0)) throw ContractViolation("penalty lambda must be >= 0");

  std::optional<FitResult> best;
  std::vector<double> per_k;
  std::vector<double> previous;
  bool have_previous = false;
  for (std::size_t kk = 0; kk <= cfg.k_max && data.size() >= 2 * kk + 1; ++kk) {
    FitResult r;
    try {
      r = fit_known_k(data, k, kk, cfg, have_previous ? std::span<const double>(previous) : std::span<const double>());
    } catch (const EstimationFailed&) {
      per_k.push_back(kInf);
      have_previous = false;
      continue;
    }
    per_k.push_back(r.objective);
    const auto th = r.theta_hat;
    previous.clear();
    for (std::size_t j = 0; j < th.num_jumps(); ++j) previous.push_back(th.jump(j));
    have_previous = true;
    r.lambda = lambda;
    r.penalized_objective = r.objective + lambda * static_cast<double>(kk + 1);
    if (!best || r.penalized_objective < best->penalized_objective) best = std::move(r);
  }
  if (!best) throw EstimationFailed("no jump count produced a feasible fit");
  best->diagnostics.objective_per_k = std::move(per_k);
  return *best;
}

std::vector<double> fitted_values(const Dataset& data, const Kernel& k, const ThetaVector& theta) {
  std::vector<double> out(data.size(), 0.0);
  const std::size_t kk = theta.num_jumps();
  for (std::size_t j = 0; j <= kk; ++j) {
    const double lo = j == 0 ? -kInf : theta.jump(j - 1);
    const double hi = j == kk ? kInf : theta.jump(j);
    for (std::size_t i = 0; i < data.size(); ++i) out[i] += theta.level(j) * delta_phi(k, data.x[i], lo, hi);
  }
  return out;
}

}  // namespace stepdeconv
