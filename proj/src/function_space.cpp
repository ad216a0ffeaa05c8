#include "npivlab/function_space.hpp"

#include "npivlab/error.hpp"
#include "normal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

namespace npivlab {

namespace {

struct LegendreRule {
  std::vector<double> nodes;    // ascending, on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

LegendreRule legendre_rule(std::size_t m) {
  LegendreRule rule;
  rule.nodes.resize(m);
  rule.weights.resize(m);
  const double md = static_cast<double>(m);
  for (std::size_t i = 0; i < (m + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (md + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (std::size_t j = 1; j <= m; ++j) {
        const double jd = static_cast<double>(j);
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * jd - 1.0) * z * p2 - (jd - 1.0) * p3) / jd;
      }
      dp = md * (z * p1 - p2) / (z * z - 1.0);
      const double prev = z;
      z = prev - p1 / dp;
      if (std::abs(z - prev) <= 1e-16) break;
    }
    // Recompute P'_m at the converged root for the weight.
    double p1 = 1.0;
    double p2 = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
      const double jd = static_cast<double>(j);
      const double p3 = p2;
      p2 = p1;
      p1 = ((2.0 * jd - 1.0) * z * p2 - (jd - 1.0) * p3) / jd;
    }
    dp = md * (z * p1 - p2) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[m - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[m - 1 - i] = w;
  }
  if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
  return rule;
}

void validate_rule(const std::vector<double>& nodes, const std::vector<double>& weights) {
  require(!nodes.empty() && nodes.size() == weights.size(), ErrorCode::invalid_argument,
          "grid needs matching, non-empty node and weight lists");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    require(nodes[i] >= 0.0 && nodes[i] <= 1.0, ErrorCode::invalid_argument,
            "grid nodes must lie in [0,1]");
    require(i == 0 || nodes[i] > nodes[i - 1], ErrorCode::invalid_argument,
            "grid nodes must be strictly increasing");
    require(weights[i] > 0.0 && std::isfinite(weights[i]), ErrorCode::invalid_argument,
            "grid weights must be positive");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  require(std::abs(total - 1.0) <= 1e-12, ErrorCode::invalid_argument,
          "grid weights must sum to one");
}

std::vector<double> scores_of(const std::vector<double>& nodes) {
  std::vector<double> s(nodes.size());
  std::transform(nodes.begin(), nodes.end(), s.begin(), detail::normal_quantile);
  return s;
}

// Weights of the derivative at t of the quadratic through p0, p1, p2.
std::array<double, 3> quadratic_derivative_weights(double p0, double p1, double p2, double t) {
  return {((t - p1) + (t - p2)) / ((p0 - p1) * (p0 - p2)),
          ((t - p0) + (t - p2)) / ((p1 - p0) * (p1 - p2)),
          ((t - p0) + (t - p1)) / ((p2 - p0) * (p2 - p1))};
}

// Three-point derivative stencil at node i: start index and weights.
std::pair<std::size_t, std::array<double, 3>> fd_stencil(std::span<const double> x,
                                                         std::size_t i) {
  const std::size_t n = x.size();
  const std::size_t s = i == 0 ? 0 : (i == n - 1 ? n - 3 : i - 1);
  return {s, quadratic_derivative_weights(x[s], x[s + 1], x[s + 2], x[i])};
}

std::vector<double> fd_derivative(std::span<const double> x, std::span<const double> f) {
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0);
  if (n == 2) {
    const double slope = (f[1] - f[0]) / (x[1] - x[0]);
    d = {slope, slope};
  } else if (n >= 3) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto [s, w] = fd_stencil(x, i);
      d[i] = w[0] * f[s] + w[1] * f[s + 1] + w[2] * f[s + 2];
    }
  }
  return d;
}

double binomial(unsigned n, unsigned k) {
  double c = 1.0;
  for (unsigned j = 1; j <= k; ++j) c = c * (n - k + j) / j;
  return c;
}

}  // namespace

std::string_view to_string(GridRule rule) {
  switch (rule) {
    case GridRule::gauss_legendre: return "gauss_legendre";
    case GridRule::uniform_trapezoid: return "uniform_trapezoid";
    case GridRule::normal_scores: return "normal_scores";
    case GridRule::custom: return "custom";
  }
  return "custom";
}

GridRule grid_rule_from_string(std::string_view name) {
  if (name == "gauss_legendre") return GridRule::gauss_legendre;
  if (name == "uniform_trapezoid") return GridRule::uniform_trapezoid;
  if (name == "normal_scores") return GridRule::normal_scores;
  fail(ErrorCode::invalid_argument, "unknown grid rule '" + std::string(name) + "'");
}

double Grid::step() const {
  require(rule_ == GridRule::uniform_trapezoid, ErrorCode::invalid_argument,
          "step() needs a uniform grid");
  return 1.0 / static_cast<double>(size() - 1);
}

GridPtr make_grid(std::size_t size, GridRule rule) {
  require(size >= 2, ErrorCode::invalid_argument, "grid size must be at least 2");
  std::shared_ptr<Grid> g(new Grid());
  g->rule_ = rule;
  switch (rule) {
    case GridRule::gauss_legendre: {
      const LegendreRule lr = legendre_rule(size);
      g->nodes_.resize(size);
      g->weights_.resize(size);
      g->bary_.resize(size);
      for (std::size_t i = 0; i < size; ++i) {
        const double t = lr.nodes[i];
        g->nodes_[i] = 0.5 * (t + 1.0);
        g->weights_[i] = 0.5 * lr.weights[i];
        const double sign = i % 2 == 0 ? 1.0 : -1.0;
        g->bary_[i] = sign * std::sqrt((1.0 - t * t) * lr.weights[i]);
      }
      g->scores_ = scores_of(g->nodes_);
      break;
    }
    case GridRule::uniform_trapezoid: {
      const double h = 1.0 / static_cast<double>(size - 1);
      g->nodes_.resize(size);
      g->weights_.assign(size, h);
      for (std::size_t i = 0; i < size; ++i) g->nodes_[i] = static_cast<double>(i) * h;
      g->nodes_.back() = 1.0;
      g->weights_.front() = g->weights_.back() = 0.5 * h;
      g->scores_ = scores_of(g->nodes_);
      break;
    }
    case GridRule::normal_scores: {
      require(size <= 512, ErrorCode::invalid_argument,
              "normal_scores grids are limited to 512 nodes");
      const LegendreRule lr = legendre_rule(size);
      g->nodes_.resize(size);
      g->weights_.resize(size);
      g->scores_.resize(size);
      for (std::size_t i = 0; i < size; ++i) {
        const double a = kNormalScoreHalfWidth * lr.nodes[i];
        g->scores_[i] = a;
        g->nodes_[i] = detail::normal_cdf(a);
        g->weights_[i] = lr.weights[i] * detail::normal_pdf(a);
      }
      const double total = std::accumulate(g->weights_.begin(), g->weights_.end(), 0.0);
      for (double& w : g->weights_) w /= total;
      for (std::size_t i = 1; i < size; ++i) {
        require(g->nodes_[i] > g->nodes_[i - 1], ErrorCode::numerical,
                "normal_scores nodes collapsed in double precision");
      }
      break;
    }
    case GridRule::custom:
      fail(ErrorCode::invalid_argument, "custom grids are built with make_custom_grid");
  }
  return g;
}

GridPtr make_custom_grid(std::vector<double> nodes, std::vector<double> weights) {
  validate_rule(nodes, weights);
  std::shared_ptr<Grid> g(new Grid());
  g->rule_ = GridRule::custom;
  g->scores_ = scores_of(nodes);
  g->nodes_ = std::move(nodes);
  g->weights_ = std::move(weights);
  return g;
}

bool same_grid(const Grid& a, const Grid& b) {
  if (&a == &b) return true;
  return a.rule() == b.rule() && std::ranges::equal(a.nodes(), b.nodes()) &&
         std::ranges::equal(a.weights(), b.weights());
}

void require_same_grid(const Grid& a, const Grid& b, std::string_view where) {
  if (!same_grid(a, b)) {
    fail(ErrorCode::grid_mismatch, std::string(where) + ": functions live on different grids (" +
                                       std::to_string(a.size()) + " vs " +
                                       std::to_string(b.size()) + " nodes)");
  }
}

GridFunction::GridFunction(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  require(grid_ != nullptr, ErrorCode::invalid_argument, "grid function without a grid");
  require(values_.size() == grid_->size(), ErrorCode::invalid_argument,
          "grid function has " + std::to_string(values_.size()) + " values for " +
              std::to_string(grid_->size()) + " nodes");
  for (double v : values_) {
    require(std::isfinite(v), ErrorCode::numerical, "grid function value is not finite");
  }
}

GridFunction GridFunction::constant(GridPtr grid, double value) {
  const std::size_t n = grid->size();
  return {std::move(grid), std::vector<double>(n, value)};
}

GridFunction GridFunction::sample(GridPtr grid, const std::function<double(double)>& f) {
  std::vector<double> v(grid->size());
  std::ranges::transform(grid->nodes(), v.begin(), f);
  return {std::move(grid), std::move(v)};
}

GridFunction GridFunction::from_vector(GridPtr grid, const Eigen::VectorXd& v) {
  return {std::move(grid), std::vector<double>(v.data(), v.data() + v.size())};
}

GridFunction operator+(const GridFunction& a, const GridFunction& b) {
  require_same_grid(a.grid(), b.grid(), "operator+");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + b[i];
  return {a.grid_ptr(), std::move(v)};
}

GridFunction operator-(const GridFunction& a, const GridFunction& b) {
  require_same_grid(a.grid(), b.grid(), "operator-");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] - b[i];
  return {a.grid_ptr(), std::move(v)};
}

GridFunction operator*(double c, const GridFunction& f) {
  std::vector<double> v(f.values().begin(), f.values().end());
  for (double& x : v) x *= c;
  return {f.grid_ptr(), std::move(v)};
}

double inner_product(const GridFunction& f, const GridFunction& g) {
  require_same_grid(f.grid(), g.grid(), "inner_product");
  const auto w = f.grid().weights();
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f[i] * g[i];
  return s;
}

double l2_norm(const GridFunction& f) { return std::sqrt(inner_product(f, f)); }

Eigen::MatrixXd interpolation_matrix(const Grid& source, const Grid& target) {
  const auto xs = source.nodes();
  const auto xt = target.nodes();
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(xt.size()), n);
  if (same_grid(source, target)) return Eigen::MatrixXd::Identity(n, n);

  if (source.rule() == GridRule::gauss_legendre) {
    const auto b = source.barycentric_weights();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double t = xt[static_cast<std::size_t>(r)];
      double total = 0.0;
      bool hit = false;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = t - xs[static_cast<std::size_t>(j)];
        if (d == 0.0) {
          m.row(r).setZero();
          m(r, j) = 1.0;
          hit = true;
          break;
        }
        m(r, j) = b[static_cast<std::size_t>(j)] / d;
        total += m(r, j);
      }
      if (!hit) m.row(r) /= total;
    }
    return m;
  }

  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double t = xt[static_cast<std::size_t>(r)];
    if (n == 1 || t <= xs.front()) {
      m(r, 0) = 1.0;
      continue;
    }
    if (t >= xs.back()) {
      m(r, n - 1) = 1.0;
      continue;
    }
    const auto hi = static_cast<Eigen::Index>(std::upper_bound(xs.begin(), xs.end(), t) - xs.begin());
    const double x0 = xs[static_cast<std::size_t>(hi - 1)];
    const double x1 = xs[static_cast<std::size_t>(hi)];
    const double theta = (t - x0) / (x1 - x0);
    m(r, hi - 1) = 1.0 - theta;
    m(r, hi) = theta;
  }
  return m;
}

GridFunction resample(const GridFunction& f, const GridPtr& target) {
  if (same_grid(f.grid(), *target)) return {target, {f.values().begin(), f.values().end()}};
  const Eigen::VectorXd v = interpolation_matrix(f.grid(), *target) * f.vec();
  return GridFunction::from_vector(target, v);
}

Eigen::MatrixXd differentiation_matrix(const Grid& grid) {
  const auto x = grid.nodes();
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  if (grid.rule() == GridRule::gauss_legendre) {
    const auto b = grid.barycentric_weights();
    for (Eigen::Index i = 0; i < n; ++i) {
      double diag = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto iu = static_cast<std::size_t>(i);
        const auto ju = static_cast<std::size_t>(j);
        d(i, j) = (b[ju] / b[iu]) / (x[iu] - x[ju]);
        diag -= d(i, j);
      }
      d(i, i) = diag;
    }
    return d;
  }
  if (n == 2) {
    const double h = x[1] - x[0];
    d << -1.0 / h, 1.0 / h, -1.0 / h, 1.0 / h;
  } else if (n >= 3) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [s, w] = fd_stencil(x, static_cast<std::size_t>(i));
      for (Eigen::Index k = 0; k < 3; ++k) d(i, static_cast<Eigen::Index>(s) + k) = w[static_cast<std::size_t>(k)];
    }
  }
  return d;
}

GridFunction derivative(const GridFunction& f, const GridPtr& inspection_grid) {
  require(inspection_grid->rule() == GridRule::uniform_trapezoid, ErrorCode::invalid_argument,
          "derivative needs a uniform inspection grid");
  require(inspection_grid->size() >= 3, ErrorCode::invalid_argument,
          "derivative needs at least 3 inspection nodes");
  const GridFunction g = resample(f, inspection_grid);
  return {inspection_grid, fd_derivative(inspection_grid->nodes(), g.values())};
}

double sobolev_norm(const GridFunction& f) {
  const Grid& grid = f.grid();
  std::vector<double> df;
  if (grid.rule() == GridRule::gauss_legendre) {
    const Eigen::VectorXd d = differentiation_matrix(grid) * f.vec();
    df.assign(d.data(), d.data() + d.size());
  } else {
    df = fd_derivative(grid.nodes(), f.values());
  }
  const GridFunction dfun(f.grid_ptr(), std::move(df));
  const double a = l2_norm(f);
  const double b = l2_norm(dfun);
  return std::sqrt(a * a + b * b);
}

namespace {
double checked_tol(double tol) {
  require(std::isfinite(tol) && tol >= 0.0, ErrorCode::invalid_argument,
          "shape tolerance must be finite and non-negative");
  return tol;
}
}  // namespace

ShapeConstraint ShapeConstraint::nonnegative(double tol) {
  return {Kind::nonnegative, 0, checked_tol(tol)};
}
ShapeConstraint ShapeConstraint::monotone(double tol) {
  return {Kind::monotone_nondecreasing, 1, checked_tol(tol)};
}
ShapeConstraint ShapeConstraint::convex(double tol) { return {Kind::convex, 2, checked_tol(tol)}; }
ShapeConstraint ShapeConstraint::derivative_sign(unsigned m, double tol) {
  require(m >= 1, ErrorCode::invalid_argument, "derivative_sign order must be at least 1");
  return {Kind::derivative_sign, m, checked_tol(tol)};
}

unsigned ShapeConstraint::difference_order() const {
  switch (kind) {
    case Kind::nonnegative: return 0;
    case Kind::monotone_nondecreasing: return 1;
    case Kind::convex: return 2;
    case Kind::derivative_sign: return order;
  }
  return 0;
}

std::string to_string(const ShapeConstraint& c) {
  switch (c.kind) {
    case ShapeConstraint::Kind::nonnegative: return "nonnegative";
    case ShapeConstraint::Kind::monotone_nondecreasing: return "monotone";
    case ShapeConstraint::Kind::convex: return "convex";
    case ShapeConstraint::Kind::derivative_sign:
      return "derivative_sign:" + std::to_string(c.order);
  }
  return {};
}

ShapeConstraint shape_constraint_from_string(std::string_view text, double tol) {
  if (text == "nonnegative") return ShapeConstraint::nonnegative(tol);
  if (text == "monotone" || text == "monotone_nondecreasing") return ShapeConstraint::monotone(tol);
  if (text == "convex") return ShapeConstraint::convex(tol);
  constexpr std::string_view prefix = "derivative_sign:";
  if (text.starts_with(prefix)) {
    const std::string digits(text.substr(prefix.size()));
    std::size_t used = 0;
    int m = 0;
    try {
      m = std::stoi(digits, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == digits.size() && m >= 1, ErrorCode::invalid_argument,
            "bad derivative_sign order in '" + std::string(text) + "'");
    return ShapeConstraint::derivative_sign(static_cast<unsigned>(m), tol);
  }
  fail(ErrorCode::invalid_argument, "unknown shape constraint '" + std::string(text) + "'");
}

Eigen::MatrixXd difference_matrix(std::size_t size, unsigned order) {
  require(size > order, ErrorCode::invalid_argument, "too few nodes for the difference order");
  const auto rows = static_cast<Eigen::Index>(size - order);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(size));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (unsigned k = 0; k <= order; ++k) {
      const double sign = (order - k) % 2 == 0 ? 1.0 : -1.0;
      d(i, i + static_cast<Eigen::Index>(k)) = sign * binomial(order, k);
    }
  }
  return d;
}

ShapeVerdict check_shape(const GridFunction& f, const ShapeConstraint& c) {
  require(c.tolerance >= 0.0, ErrorCode::invalid_argument, "shape tolerance must be >= 0");
  require(f.grid().rule() == GridRule::uniform_trapezoid, ErrorCode::invalid_argument,
          "check_shape needs a function on a uniform inspection grid");
  const unsigned m = c.difference_order();
  require(f.size() >= m + 2, ErrorCode::invalid_argument,
          "inspection grid too small for " + to_string(c));

  std::vector<double> coef(m + 1);
  for (unsigned k = 0; k <= m; ++k) {
    coef[k] = ((m - k) % 2 == 0 ? 1.0 : -1.0) * binomial(m, k);
  }
  ShapeVerdict verdict;
  verdict.worst_slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + m < f.size(); ++i) {
    double diff = 0.0;
    for (unsigned k = 0; k <= m; ++k) diff += coef[k] * f[i + k];
    if (diff < verdict.worst_slack) {
      verdict.worst_slack = diff;
      verdict.worst_node = i;
    }
  }
  verdict.worst_x = f.grid().nodes()[verdict.worst_node];
  verdict.satisfied = verdict.worst_slack >= -c.tolerance;
  return verdict;
}

ShapeVerdict check_shape(const GridFunction& f, const ShapeConstraint& c,
                         const GridPtr& inspection_grid) {
  return check_shape(resample(f, inspection_grid), c);
}

}  // namespace npivlab
