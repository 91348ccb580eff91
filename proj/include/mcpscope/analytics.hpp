#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mcpscope/kernels/exec.hpp"

namespace mcpscope::analytics {

enum class Model { linear, quadratic, exponential, asymptotic, poly_convergence };

std::string_view to_string(Model m);
Model parse_model(std::string_view name);
/// Parameter names in solver order: linear (a,b), quadratic (a,b,c), exponential (A,k),
/// asymptotic (L,y0,k), poly_convergence (L,a,b,c).
const std::vector<std::string>& param_names(Model m);
double evaluate(Model m, std::span<const double> params, double t);

/// Monthly series; t is the month index counted from 2024-11.
struct TimeSeries {
    std::vector<double> t;
    std::vector<double> y;
    std::vector<double> weights;  // empty = unweighted

    [[nodiscard]] std::size_t size() const { return t.size(); }
    [[nodiscard]] bool weighted() const { return !weights.empty(); }
    /// Throws std::invalid_argument unless t is strictly increasing, sizes agree and
    /// every weight is positive and finite.
    void validate() const;
    /// Digest of the exact point values, embedded in every FitResult.
    [[nodiscard]] std::string digest() const;
};

struct Interval {
    double lower = 0;
    double upper = 0;
};

enum class CiMethod { covariance, bootstrap_standard, bootstrap_wild, delta };
std::string_view to_string(CiMethod m);

struct Bound {
    std::optional<double> lower;
    std::optional<double> upper;
};

struct FitOptions {
    double tolerance = 1e-10;  // relative parameter change
    int max_iterations = 10000;
    double confidence = 0.95;
    std::map<std::string, Bound> bounds;  // by parameter name; none by default
};

struct FitResult {
    Model model = Model::linear;
    std::vector<std::string> names;
    std::vector<double> params;
    double r_squared = 0;
    bool converged = false;
    int iterations = 0;
    std::string status;
    Eigen::MatrixXd covariance;
    CiMethod ci_method = CiMethod::covariance;
    std::map<std::string, Interval> ci;  // parameters and derived quantities
    std::map<std::string, double> derived;
    std::vector<std::string> active_bounds;
    bool ci_reliable = true;
    std::optional<std::uint64_t> seed;
    double tolerance = 0;
    int max_iterations = 0;
    std::size_t n_points = 0;
    double residual_variance = 0;
    std::string data_digest;

    [[nodiscard]] double param(std::string_view name) const;
    [[nodiscard]] double predict(double t) const;
    /// Pointwise band from the parameter covariance (delta method on the curve).
    [[nodiscard]] Interval predict_band(double t, double confidence = 0.95) const;
};

/// Weighted least squares fit. Nonlinear models run a damped Gauss-Newton
/// (Levenberg-Marquardt) iteration from fixed initial values:
///   asymptotic:       L = 1.05 max(y), y0 = y[0], k = 0.1
///   poly_convergence: L = 1.05 max(y), (a,b,c) from a WLS quadratic of log(L - y); also
///                     restarted from the three best of a grid of L above max(y), keeping
///                     the lowest-cost converged solution
///   exponential:      log-linear WLS
/// Throws std::invalid_argument for too few points (< params + 1) or y <= 0 with the
/// exponential model. Non-convergence is reported through `converged`/`status`.
FitResult fit(const TimeSeries& series, Model model, const FitOptions& options = {});

/// ln 2 / k with the interval mapped through k's interval. Throws if k <= 0.
struct DoublingTime {
    double months = 0;
    Interval ci;
};
DoublingTime doubling_time(const FitResult& exponential_fit);

/// Mean of b + 2ct over `t`, with a delta-method interval from the fit covariance.
struct MarginalChange {
    double estimate = 0;
    Interval ci;
};
MarginalChange average_marginal_change(const FitResult& quadratic_fit, std::span<const double> t,
                                       double confidence = 0.95);

enum class BootstrapKind { standard, wild };

struct BootstrapOptions {
    BootstrapKind kind = BootstrapKind::wild;
    std::size_t n_boot = 1000;
    std::uint64_t seed = 42;
    double confidence = 0.95;
    kernels::Exec exec = kernels::Exec::parallel;
};

struct BootstrapResult {
    std::map<std::string, Interval> ci;
    std::vector<std::vector<double>> replicates;  // converged replicates, in index order
    std::size_t n_failed = 0;
    bool reliable = true;  // false when more than 20% of replicate fits failed
    std::uint64_t seed = 0;
};

/// Percentile bootstrap around a converged base fit. Replicate r draws from an engine
/// seeded with seed + r, so results do not depend on scheduling.
BootstrapResult bootstrap_ci(const TimeSeries& series, Model model, const BootstrapOptions& boot,
                             const FitOptions& options = {});

/// Copies bootstrap intervals into a fit and marks its CI method.
void apply_bootstrap(FitResult& fit, const BootstrapResult& boot, BootstrapKind kind);

/// Type-7 quantile of unsorted values.
double quantile(std::vector<double> values, double q);

/// n_items x n_raters categorical labels (category indices).
struct RatingsMatrix {
    std::size_t n_items = 0;
    std::size_t n_raters = 0;
    std::vector<std::string> categories;
    std::vector<int> labels;  // row-major, item-by-rater

    static RatingsMatrix from_labels(const std::vector<std::vector<std::string>>& rows);
    [[nodiscard]] int at(std::size_t item, std::size_t rater) const {
        return labels[item * n_raters + rater];
    }
};

struct KappaResult {
    double kappa = 0;
    double p_bar = 0;
    double p_expected = 0;
    bool degenerate = false;  // P_e == 1: every rating in one category, reported as 1.0
};

KappaResult fleiss_kappa(const RatingsMatrix& m);

struct StakesPoint {
    double score = 0;  // 0..100 impact-of-decisions
    double count = 0;  // action tools mapped to the occupation
};

struct StakesFit {
    FitResult fit;  // quadratic of log10(count) on score
    double f_statistic = 0;
    double p_value = 1;
    std::size_t n_used = 0;
};

/// Drops occupations with count <= 0, then tests the quadratic against an
/// intercept-only model. Throws std::invalid_argument with fewer than four usable
/// occupations or fewer than three distinct scores.
StakesFit stakes_fit(std::span<const StakesPoint> points);

nlohmann::json to_json(const FitResult& fit);
nlohmann::json to_json(const StakesFit& fit);

}  // namespace mcpscope::analytics
