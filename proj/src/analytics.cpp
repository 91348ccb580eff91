#include "mcpscope/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "mcpscope/common/io.hpp"
#include "mcpscope/kernels/bootstrap.hpp"

namespace mcpscope::analytics {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t n_params(Model m) { return param_names(m).size(); }

/// Gradient of the model with respect to its parameters at t.
void gradient(Model m, std::span<const double> p, double t, std::span<double> g) {
    switch (m) {
        case Model::linear:
            g[0] = 1;
            g[1] = t;
            break;
        case Model::quadratic:
            g[0] = 1;
            g[1] = t;
            g[2] = t * t;
            break;
        case Model::exponential: {
            double e = std::exp(p[1] * t);
            g[0] = e;
            g[1] = p[0] * t * e;
            break;
        }
        case Model::asymptotic: {
            double e = std::exp(-p[2] * t);
            g[0] = 1 - e;
            g[1] = e;
            g[2] = (p[0] - p[1]) * t * e;
            break;
        }
        case Model::poly_convergence: {
            double e = std::exp(p[1] + p[2] * t + p[3] * t * t);
            g[0] = 1;
            g[1] = -e;
            g[2] = -t * e;
            g[3] = -t * t * e;
            break;
        }
    }
}

double t_quantile(double confidence, std::size_t dof) {
    if (dof == 0) return kInf;
    boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(dist, 0.5 + confidence / 2.0);
}

std::vector<double> unit_weights_if_empty(const TimeSeries& s) {
    return s.weighted() ? s.weights : std::vector<double>(s.size(), 1.0);
}

double weighted_cost(Model m, std::span<const double> p, const std::vector<double>& t,
                     const std::vector<double>& y, const std::vector<double>& w) {
    double cost = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        double r = y[i] - evaluate(m, p, t[i]);
        cost += w[i] * r * r;
    }
    return cost;
}

/// Weighted polynomial least squares (degree 1 or 2). Returns params and (X'WX)^-1.
std::pair<std::vector<double>, Mat> wls_polynomial(const std::vector<double>& t,
                                                   const std::vector<double>& y,
                                                   const std::vector<double>& w, int degree) {
    const std::size_t n = t.size();
    if (degree == 1) {
        // Centered closed form; exact for constant and exactly linear integer data.
        double sw = 0, st = 0, sy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sw += w[i];
            st += w[i] * t[i];
            sy += w[i] * y[i];
        }
        double tbar = st / sw, ybar = sy / sw;
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double dt = t[i] - tbar;
            sxx += w[i] * dt * dt;
            sxy += w[i] * dt * (y[i] - ybar);
        }
        if (sxx <= 0) throw std::invalid_argument("degenerate design: all t equal");
        double b = sxy / sxx;
        double a = ybar - b * tbar;
        Mat inv(2, 2);
        inv(0, 0) = 1.0 / sw + tbar * tbar / sxx;
        inv(0, 1) = inv(1, 0) = -tbar / sxx;
        inv(1, 1) = 1.0 / sxx;
        return {{a, b}, inv};
    }
    Mat x(n, degree + 1);
    Vec rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sw = std::sqrt(w[i]);
        double pow = 1;
        for (int d = 0; d <= degree; ++d) {
            x(i, d) = sw * pow;
            pow *= t[i];
        }
        rhs(i) = sw * y[i];
    }
    Eigen::ColPivHouseholderQR<Mat> qr(x);
    if (qr.rank() < degree + 1) throw std::invalid_argument("degenerate design matrix");
    Vec beta = qr.solve(rhs);
    Mat xtx = x.transpose() * x;
    Mat inv = xtx.inverse();
    return {std::vector<double>(beta.data(), beta.data() + beta.size()), inv};
}

std::vector<double> poly_start(const std::vector<double>& t, const std::vector<double>& y,
                               const std::vector<double>& w, double L);

std::vector<double> initial_params(Model m, const std::vector<double>& t,
                                   const std::vector<double>& y, const std::vector<double>& w) {
    switch (m) {
        case Model::exponential: {
            std::vector<double> ly(y.size());
            std::transform(y.begin(), y.end(), ly.begin(), [](double v) { return std::log(v); });
            auto [p, _] = wls_polynomial(t, ly, w, 1);
            return {std::exp(p[0]), p[1]};
        }
        case Model::asymptotic: {
            double ymax = *std::max_element(y.begin(), y.end());
            return {ymax * 1.05, y.front(), 0.1};
        }
        case Model::poly_convergence: {
            double ymax = *std::max_element(y.begin(), y.end());
            double ymin = *std::min_element(y.begin(), y.end());
            double L = ymax * 1.05;
            if (!(L > ymax)) L = ymax + 0.05 * std::max(ymax - ymin, 1e-3);
            return poly_start(t, y, w, L);
        }
        default:
            throw std::logic_error("initial_params called for a linear model");
    }
}

/// (a,b,c) by WLS on log(L - y) for a fixed L above every y.
std::vector<double> poly_start(const std::vector<double>& t, const std::vector<double>& y,
                               const std::vector<double>& w, double L) {
    std::vector<double> lr(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) lr[i] = std::log(L - y[i]);
    auto [p, _] = wls_polynomial(t, lr, w, 2);
    return {L, p[0], p[1], p[2]};
}

/// The default start first, then for poly_convergence a grid of L above max(y); L and the
/// curvature trade off along a narrow valley, so a start just above max(y) can settle short.
std::vector<std::vector<double>> starts(Model m, const std::vector<double>& t, const std::vector<double>& y,
                                        const std::vector<double>& w) {
    std::vector<std::vector<double>> out{initial_params(m, t, y, w)};
    if (m != Model::poly_convergence) return out;
    double ymax = *std::max_element(y.begin(), y.end());
    double span = std::max(ymax - *std::min_element(y.begin(), y.end()), 1e-3);
    std::vector<std::pair<double, std::vector<double>>> grid;
    for (double d : {0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0}) {
        auto p = poly_start(t, y, w, ymax + d * span);
        double c = weighted_cost(m, p, t, y, w);
        if (std::isfinite(c)) grid.emplace_back(c, std::move(p));
    }
    std::sort(grid.begin(), grid.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < std::min<std::size_t>(3, grid.size()); ++i) out.push_back(grid[i].second);
    return out;
}

void project(std::vector<double>& p, const std::vector<std::string>& names,
             const FitOptions& opt) {
    for (std::size_t j = 0; j < p.size(); ++j) {
        auto it = opt.bounds.find(names[j]);
        if (it == opt.bounds.end()) continue;
        if (it->second.lower) p[j] = std::max(p[j], *it->second.lower);
        if (it->second.upper) p[j] = std::min(p[j], *it->second.upper);
    }
}

struct SolveOutcome {
    std::vector<double> params;
    bool converged = false;
    int iterations = 0;
    std::string status;
};

SolveOutcome levenberg_marquardt(Model m, std::vector<double> p, const std::vector<double>& t,
                                 const std::vector<double>& y, const std::vector<double>& w,
                                 const FitOptions& opt) {
    const auto& names = param_names(m);
    const std::size_t np = p.size(), n = t.size();
    project(p, names, opt);
    double cost = weighted_cost(m, p, t, y, w);
    double lambda = 1e-3;
    double scale = 0;
    for (std::size_t i = 0; i < n; ++i) scale += w[i] * y[i] * y[i];
    std::vector<double> g(np);
    Mat jtj(np, np);
    Vec jtr(np);
    SolveOutcome out;
    for (int iter = 1; iter <= opt.max_iterations; ++iter) {
        out.iterations = iter;
        if (!std::isfinite(cost)) {
            out.status = "non-finite objective";
            out.params = p;
            return out;
        }
        jtj.setZero();
        jtr.setZero();
        for (std::size_t i = 0; i < n; ++i) {
            gradient(m, p, t[i], g);
            double r = y[i] - evaluate(m, p, t[i]);
            for (std::size_t a = 0; a < np; ++a) {
                jtr(a) += w[i] * g[a] * r;
                for (std::size_t b = 0; b < np; ++b) jtj(a, b) += w[i] * g[a] * g[b];
            }
        }
        // Share of the remaining cost a full Gauss-Newton step would remove.
        Vec gn = jtj.completeOrthogonalDecomposition().solve(jtr);
        double decrement = cost > 0 ? std::max(0.0, jtr.dot(gn)) / cost : 0.0;
        bool exact = cost <= 1e-26 * scale;
        bool stationary = exact || decrement < 1e-9;
        if (cost == 0 || (exact && decrement < 1.0)) {
            out.converged = true;
            out.status = "converged (exact fit)";
            out.params = p;
            return out;
        }
        bool accepted = false;
        while (!accepted) {
            Mat damped = jtj;
            for (std::size_t a = 0; a < np; ++a) {
                damped(a, a) += lambda * std::max(jtj(a, a), 1e-300);
            }
            Vec delta = damped.ldlt().solve(jtr);
            std::vector<double> cand(np);
            for (std::size_t a = 0; a < np; ++a) cand[a] = p[a] + delta(a);
            project(cand, names, opt);
            double cand_cost = weighted_cost(m, cand, t, y, w);
            double rel = 0;
            for (std::size_t a = 0; a < np; ++a) {
                rel = std::max(rel, std::abs(cand[a] - p[a]) / (std::abs(p[a]) + opt.tolerance));
            }
            if (std::isfinite(cand_cost) && cand_cost < cost) {
                p = std::move(cand);
                cost = cand_cost;
                lambda = std::max(lambda / 10.0, 1e-15);
                accepted = true;
                // A tiny step under heavy damping is not convergence; require stationarity too.
                if (rel < opt.tolerance && stationary) {
                    out.converged = true;
                    out.status = "converged";
                    out.params = p;
                    return out;
                }
            } else if (rel < opt.tolerance && stationary) {
                out.converged = true;
                out.status = "converged";
                out.params = p;
                return out;
            } else {
                lambda *= 10.0;
                if (lambda > 1e20) {
                    out.converged = stationary;
                    out.status = out.converged ? "converged (step floor)" : "stalled";
                    out.params = p;
                    return out;
                }
            }
        }
    }
    out.status = fmt::format("not converged after {} iterations", opt.max_iterations);
    out.params = p;
    return out;
}

/// Fits without the strictly-increasing check (bootstrap resamples repeat t).
FitResult fit_points(const std::vector<double>& t, const std::vector<double>& y,
                     const std::vector<double>& w, Model model, const FitOptions& opt,
                     const std::vector<double>* warm_start) {
    const std::size_t np = n_params(model);
    if (t.size() < np + 1) {
        throw std::invalid_argument(fmt::format("{} needs at least {} points, got {}",
                                                to_string(model), np + 1, t.size()));
    }
    if (model == Model::exponential &&
        std::any_of(y.begin(), y.end(), [](double v) { return !(v > 0); })) {
        throw std::invalid_argument("exponential fit requires y > 0");
    }
    FitResult res;
    res.model = model;
    res.names = param_names(model);
    res.tolerance = opt.tolerance;
    res.max_iterations = opt.max_iterations;
    res.n_points = t.size();

    Mat design_inv;  // (J'WJ)^-1 at the solution
    if (model == Model::linear || model == Model::quadratic) {
        auto [p, inv] = wls_polynomial(t, y, w, model == Model::linear ? 1 : 2);
        res.params = std::move(p);
        design_inv = std::move(inv);
        res.converged = true;
        res.status = "closed form";
    } else {
        SolveOutcome outcome;
        if (warm_start) {
            outcome = levenberg_marquardt(model, *warm_start, t, y, w, opt);
        } else {
            double best = kInf;
            bool have = false;
            for (auto& init : starts(model, t, y, w)) {
                auto o = levenberg_marquardt(model, std::move(init), t, y, w, opt);
                double c = weighted_cost(model, o.params, t, y, w);
                if (!std::isfinite(c)) c = kInf;
                // Converged beats stalled; then lower cost.
                if (!have || (o.converged && !outcome.converged) ||
                    (o.converged == outcome.converged && c < best)) {
                    best = c;
                    outcome = std::move(o);
                    have = true;
                }
            }
        }
        res.params = std::move(outcome.params);
        res.converged = outcome.converged;
        res.iterations = outcome.iterations;
        res.status = std::move(outcome.status);
        Mat jtj = Mat::Zero(np, np);
        std::vector<double> g(np);
        for (std::size_t i = 0; i < t.size(); ++i) {
            gradient(model, res.params, t[i], g);
            for (std::size_t a = 0; a < np; ++a)
                for (std::size_t b = 0; b < np; ++b) jtj(a, b) += w[i] * g[a] * g[b];
        }
        Eigen::FullPivLU<Mat> lu(jtj);
        design_inv = lu.isInvertible() ? Mat(lu.inverse())
                                       : Mat::Constant(np, np, std::numeric_limits<double>::quiet_NaN());
    }

    double sse = weighted_cost(model, res.params, t, y, w);
    double sw = std::accumulate(w.begin(), w.end(), 0.0);
    double ybar = 0;
    for (std::size_t i = 0; i < t.size(); ++i) ybar += w[i] * y[i];
    ybar /= sw;
    double sst = 0;
    for (std::size_t i = 0; i < t.size(); ++i) sst += w[i] * (y[i] - ybar) * (y[i] - ybar);
    res.r_squared = sst > 0 ? 1.0 - sse / sst : 0.0;

    const std::size_t dof = t.size() - np;
    res.residual_variance = sse / static_cast<double>(dof);
    res.covariance = design_inv * res.residual_variance;
    double q = t_quantile(opt.confidence, dof);
    for (std::size_t j = 0; j < np; ++j) {
        double se = std::sqrt(std::max(res.covariance(j, j), 0.0));
        res.ci[res.names[j]] = {res.params[j] - q * se, res.params[j] + q * se};
        auto it = opt.bounds.find(res.names[j]);
        if (it != opt.bounds.end()) {
            bool at_lower = it->second.lower && res.params[j] <= *it->second.lower;
            bool at_upper = it->second.upper && res.params[j] >= *it->second.upper;
            if (at_lower || at_upper) res.active_bounds.push_back(res.names[j]);
        }
    }
    res.ci_method = CiMethod::covariance;
    return res;
}

}  // namespace

std::string_view to_string(Model m) {
    switch (m) {
        case Model::linear: return "linear";
        case Model::quadratic: return "quadratic";
        case Model::exponential: return "exponential";
        case Model::asymptotic: return "asymptotic";
        case Model::poly_convergence: return "poly_convergence";
    }
    return "?";
}

Model parse_model(std::string_view name) {
    for (Model m : {Model::linear, Model::quadratic, Model::exponential, Model::asymptotic,
                    Model::poly_convergence}) {
        if (to_string(m) == name) return m;
    }
    throw std::invalid_argument(fmt::format("unknown model '{}'", name));
}

std::string_view to_string(CiMethod m) {
    switch (m) {
        case CiMethod::covariance: return "covariance";
        case CiMethod::bootstrap_standard: return "bootstrap_standard";
        case CiMethod::bootstrap_wild: return "bootstrap_wild";
        case CiMethod::delta: return "delta";
    }
    return "?";
}

const std::vector<std::string>& param_names(Model m) {
    static const std::vector<std::string> linear{"a", "b"};
    static const std::vector<std::string> quadratic{"a", "b", "c"};
    static const std::vector<std::string> exponential{"A", "k"};
    static const std::vector<std::string> asymptotic{"L", "y0", "k"};
    static const std::vector<std::string> poly{"L", "a", "b", "c"};
    switch (m) {
        case Model::linear: return linear;
        case Model::quadratic: return quadratic;
        case Model::exponential: return exponential;
        case Model::asymptotic: return asymptotic;
        case Model::poly_convergence: return poly;
    }
    return linear;
}

double evaluate(Model m, std::span<const double> p, double t) {
    switch (m) {
        case Model::linear: return p[0] + p[1] * t;
        case Model::quadratic: return p[0] + p[1] * t + p[2] * t * t;
        case Model::exponential: return p[0] * std::exp(p[1] * t);
        case Model::asymptotic: return p[0] - (p[0] - p[1]) * std::exp(-p[2] * t);
        case Model::poly_convergence: return p[0] - std::exp(p[1] + p[2] * t + p[3] * t * t);
    }
    return 0;
}

void TimeSeries::validate() const {
    if (y.size() != t.size()) throw std::invalid_argument("t and y differ in length");
    if (!weights.empty() && weights.size() != t.size()) {
        throw std::invalid_argument("weights differ in length from t");
    }
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (!(t[i] > t[i - 1])) throw std::invalid_argument("t must be strictly increasing");
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite y value");
    }
    for (double w : weights) {
        if (!(w > 0) || !std::isfinite(w)) throw std::invalid_argument("weights must be > 0");
    }
}

std::string TimeSeries::digest() const {
    std::string buf;
    for (std::size_t i = 0; i < t.size(); ++i) {
        buf += fmt::format("{:.17g},{:.17g},{:.17g}\n", t[i], y[i],
                           weights.empty() ? 1.0 : weights[i]);
    }
    return sha256_hex(buf);
}

double FitResult::param(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return params[i];
    }
    throw std::out_of_range(fmt::format("fit has no parameter '{}'", name));
}

double FitResult::predict(double t) const { return evaluate(model, params, t); }

Interval FitResult::predict_band(double t, double confidence) const {
    std::vector<double> g(params.size());
    gradient(model, params, t, g);
    Eigen::Map<const Vec> gv(g.data(), static_cast<Eigen::Index>(g.size()));
    double var = gv.dot(covariance * gv);
    double q = t_quantile(confidence, n_points - params.size());
    double y = predict(t);
    double half = q * std::sqrt(std::max(var, 0.0));
    return {y - half, y + half};
}

FitResult fit(const TimeSeries& series, Model model, const FitOptions& options) {
    series.validate();
    auto w = unit_weights_if_empty(series);
    FitResult res = fit_points(series.t, series.y, w, model, options, nullptr);
    res.data_digest = series.digest();
    return res;
}

DoublingTime doubling_time(const FitResult& f) {
    if (f.model != Model::exponential) {
        throw std::invalid_argument("doubling time needs an exponential fit");
    }
    double k = f.param("k");
    if (!(k > 0)) throw std::invalid_argument("k <= 0: series does not double");
    DoublingTime out;
    out.months = std::log(2.0) / k;
    auto it = f.ci.find("k");
    if (it != f.ci.end()) {
        double lo = it->second.lower, hi = it->second.upper;
        out.ci.lower = hi > 0 ? std::log(2.0) / hi : kInf;
        out.ci.upper = lo > 0 ? std::log(2.0) / lo : kInf;
    } else {
        out.ci = {out.months, out.months};
    }
    return out;
}

MarginalChange average_marginal_change(const FitResult& f, std::span<const double> t,
                                       double confidence) {
    if (f.model != Model::quadratic) {
        throw std::invalid_argument("marginal change needs a quadratic fit");
    }
    if (t.empty()) throw std::invalid_argument("empty evaluation window");
    double tbar = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
    Vec g(3);
    g << 0.0, 1.0, 2.0 * tbar;
    MarginalChange out;
    out.estimate = f.param("b") + 2.0 * f.param("c") * tbar;
    double se = std::sqrt(std::max(g.dot(f.covariance * g), 0.0));
    double q = t_quantile(confidence, f.n_points - 3);
    out.ci = {out.estimate - q * se, out.estimate + q * se};
    return out;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(values.begin(), values.end());
    double h = (static_cast<double>(values.size()) - 1.0) * q;
    auto lo = static_cast<std::size_t>(std::floor(h));
    auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapResult bootstrap_ci(const TimeSeries& series, Model model, const BootstrapOptions& boot,
                             const FitOptions& options) {
    series.validate();
    auto w = unit_weights_if_empty(series);
    FitResult base = fit_points(series.t, series.y, w, model, options, nullptr);
    if (!base.converged) throw std::invalid_argument("bootstrap needs a converged base fit");
    const std::size_t n = series.size();
    std::vector<double> fitted(n), resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        fitted[i] = base.predict(series.t[i]);
        resid[i] = series.y[i] - fitted[i];
    }

    std::vector<std::optional<std::vector<double>>> slots(boot.n_boot);
    kernels::run_replicates(
        boot.n_boot,
        [&](std::size_t r) {
            std::mt19937_64 rng(boot.seed + r);
            std::vector<double> t, y, ww;
            t.reserve(n);
            y.reserve(n);
            ww.reserve(n);
            if (boot.kind == BootstrapKind::standard) {
                std::uniform_int_distribution<std::size_t> pick(0, n - 1);
                for (std::size_t i = 0; i < n; ++i) {
                    auto j = pick(rng);
                    t.push_back(series.t[j]);
                    y.push_back(series.y[j]);
                    ww.push_back(w[j]);
                }
            } else {
                std::bernoulli_distribution coin(0.5);
                for (std::size_t i = 0; i < n; ++i) {
                    t.push_back(series.t[i]);
                    y.push_back(fitted[i] + (coin(rng) ? resid[i] : -resid[i]));
                    ww.push_back(w[i]);
                }
            }
            try {
                auto rep = fit_points(t, y, ww, model, options, &base.params);
                bool finite = std::all_of(rep.params.begin(), rep.params.end(),
                                          [](double v) { return std::isfinite(v); });
                if (rep.converged && finite) slots[r] = std::move(rep.params);
            } catch (const std::exception&) {
                // counted as a failed replicate
            }
        },
        boot.exec);

    BootstrapResult out;
    out.seed = boot.seed;
    for (auto& s : slots) {
        if (s) {
            out.replicates.push_back(std::move(*s));
        } else {
            ++out.n_failed;
        }
    }
    out.reliable = static_cast<double>(out.n_failed) <= 0.2 * static_cast<double>(boot.n_boot);
    if (out.replicates.empty()) {
        out.reliable = false;
        return out;
    }
    double alpha = (1.0 - boot.confidence) / 2.0;
    for (std::size_t j = 0; j < base.names.size(); ++j) {
        std::vector<double> col;
        col.reserve(out.replicates.size());
        for (const auto& rep : out.replicates) col.push_back(rep[j]);
        double lo = quantile(col, alpha), hi = quantile(std::move(col), 1.0 - alpha);
        // Percentile bounds can sit a few ulps inside the estimate; keep it enclosed.
        out.ci[base.names[j]] = {std::min(lo, base.params[j]), std::max(hi, base.params[j])};
    }
    return out;
}

void apply_bootstrap(FitResult& f, const BootstrapResult& boot, BootstrapKind kind) {
    for (const auto& [name, iv] : boot.ci) f.ci[name] = iv;
    f.ci_method = kind == BootstrapKind::wild ? CiMethod::bootstrap_wild
                                              : CiMethod::bootstrap_standard;
    f.seed = boot.seed;
    f.ci_reliable = boot.reliable;
}

RatingsMatrix RatingsMatrix::from_labels(const std::vector<std::vector<std::string>>& rows) {
    RatingsMatrix m;
    m.n_items = rows.size();
    m.n_raters = rows.empty() ? 0 : rows.front().size();
    std::set<std::string> cats;
    for (const auto& row : rows) {
        if (row.size() != m.n_raters) throw std::invalid_argument("ragged ratings matrix");
        for (const auto& label : row) {
            if (label.empty()) throw std::invalid_argument("empty rating cell");
            cats.insert(label);
        }
    }
    m.categories.assign(cats.begin(), cats.end());
    for (const auto& row : rows) {
        for (const auto& label : row) {
            auto it = std::lower_bound(m.categories.begin(), m.categories.end(), label);
            m.labels.push_back(static_cast<int>(it - m.categories.begin()));
        }
    }
    return m;
}

KappaResult fleiss_kappa(const RatingsMatrix& m) {
    if (m.n_raters < 2 || m.n_items < 2) {
        throw std::invalid_argument("Fleiss' kappa needs at least 2 raters and 2 items");
    }
    const std::size_t k = m.categories.size();
    if (m.labels.size() != m.n_items * m.n_raters) {
        throw std::invalid_argument("ratings matrix size mismatch");
    }
    std::vector<double> totals(k, 0.0);
    std::vector<int> counts(k);
    const double n = static_cast<double>(m.n_raters);
    double p_sum = 0;
    for (std::size_t i = 0; i < m.n_items; ++i) {
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t r = 0; r < m.n_raters; ++r) {
            int c = m.at(i, r);
            if (c < 0 || static_cast<std::size_t>(c) >= k) {
                throw std::invalid_argument("rating outside declared categories");
            }
            ++counts[c];
        }
        double sq = 0;
        for (std::size_t c = 0; c < k; ++c) {
            sq += static_cast<double>(counts[c]) * counts[c];
            totals[c] += counts[c];
        }
        p_sum += (sq - n) / (n * (n - 1));
    }
    KappaResult out;
    out.p_bar = p_sum / static_cast<double>(m.n_items);
    double denom = static_cast<double>(m.n_items) * n;
    for (double t : totals) out.p_expected += (t / denom) * (t / denom);
    if (1.0 - out.p_expected <= 1e-15) {
        out.degenerate = true;
        out.kappa = 1.0;
        return out;
    }
    out.kappa = (out.p_bar - out.p_expected) / (1.0 - out.p_expected);
    return out;
}

StakesFit stakes_fit(std::span<const StakesPoint> points) {
    std::vector<double> t, y;
    std::set<double> distinct;
    for (const auto& p : points) {
        if (!(p.count > 0)) continue;
        if (p.score < 0 || p.score > 100) {
            throw std::invalid_argument(fmt::format("stakes score {} outside [0,100]", p.score));
        }
        t.push_back(p.score);
        y.push_back(std::log10(p.count));
        distinct.insert(p.score);
    }
    if (t.size() < 4) {
        throw std::invalid_argument("stakes fit needs at least 4 occupations with tools");
    }
    if (distinct.size() < 3) {
        throw std::invalid_argument("stakes fit: degenerate score variance");
    }
    std::vector<double> w(t.size(), 1.0);
    StakesFit out;
    out.fit = fit_points(t, y, w, Model::quadratic, FitOptions{}, nullptr);
    out.n_used = t.size();
    double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double sst = 0, sse = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        sst += (y[i] - ybar) * (y[i] - ybar);
        double r = y[i] - out.fit.predict(t[i]);
        sse += r * r;
    }
    const double df2 = static_cast<double>(t.size()) - 3.0;
    // Relative floor: rounding leaves ~1e-30 of "unexplained" variance in exact data.
    bool exact = sse <= 1e-24 * std::max(sst, 1e-300);
    if (sst <= 0) {
        out.fit.r_squared = 0;
        out.f_statistic = 0;
        out.p_value = 1;
    } else if (exact) {
        out.fit.r_squared = 1;
        out.f_statistic = kInf;
        out.p_value = 0;
    } else {
        out.f_statistic = ((sst - sse) / 2.0) / (sse / df2);
        boost::math::fisher_f dist(2.0, df2);
        out.p_value = boost::math::cdf(boost::math::complement(dist, out.f_statistic));
    }
    std::string buf;
    for (std::size_t i = 0; i < t.size(); ++i) buf += fmt::format("{:.17g},{:.17g}\n", t[i], y[i]);
    out.fit.data_digest = sha256_hex(buf);
    return out;
}

nlohmann::json to_json(const FitResult& f) {
    nlohmann::json j;
    j["model"] = std::string(to_string(f.model));
    j["params"] = nlohmann::json::object();
    for (std::size_t i = 0; i < f.names.size(); ++i) j["params"][f.names[i]] = f.params[i];
    j["r_squared"] = f.r_squared;
    j["converged"] = f.converged;
    j["iterations"] = f.iterations;
    j["status"] = f.status;
    j["ci_method"] = std::string(to_string(f.ci_method));
    j["ci_reliable"] = f.ci_reliable;
    j["ci"] = nlohmann::json::object();
    for (const auto& [name, iv] : f.ci) j["ci"][name] = {iv.lower, iv.upper};
    j["derived"] = f.derived;
    j["active_bounds"] = f.active_bounds;
    j["seed"] = f.seed ? nlohmann::json(*f.seed) : nlohmann::json(nullptr);
    j["tolerance"] = f.tolerance;
    j["max_iterations"] = f.max_iterations;
    j["n_points"] = f.n_points;
    j["residual_variance"] = f.residual_variance;
    j["data_digest"] = f.data_digest;
    auto cov = nlohmann::json::array();
    for (Eigen::Index r = 0; r < f.covariance.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < f.covariance.cols(); ++c) row.push_back(f.covariance(r, c));
        cov.push_back(std::move(row));
    }
    j["covariance"] = std::move(cov);
    return j;
}

nlohmann::json to_json(const StakesFit& s) {
    auto j = to_json(s.fit);
    j["f_statistic"] = std::isfinite(s.f_statistic) ? nlohmann::json(s.f_statistic)
                                                     : nlohmann::json("inf");
    j["p_value"] = s.p_value;
    j["n_used"] = s.n_used;
    return j;
}

}  // namespace mcpscope::analytics
