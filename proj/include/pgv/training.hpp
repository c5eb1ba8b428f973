/* Level-1 of the bilevel scheme: exhaustive grid search over
 * (alpha0, alpha1, s, t), cost evaluation against the clean image, and
 * dense cost-landscape sweeps over (s, t) at frozen alpha.
 *
 * The cost of a tuple is the unsquared L2 distance
 *   C(alpha, s, t) = sqrt( sum (u_{alpha,B_{s,t}} - u_c)^2 ),
 * whose argmin coincides with that of the squared distance.
 *
 * Determinism: tuples are enumerated in lexicographic (alpha0, alpha1,
 * s, t) order and statically partitioned across workers; every solve is
 * single-threaded and seed-free, so results are bit-identical for any
 * parallelism degree. Ties are broken toward the lexicographically
 * smallest tuple.
 */
#pragma once

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pgv/core.hpp"
#include "pgv/diffops.hpp"
#include "pgv/solver.hpp"

namespace pgv {

struct CostEvaluation {
    double cost = 0.0;
    ScalarImage reconstruction;
    SolveDiagnostics diag;
};

struct EvaluationRecord {
    Alpha alpha;
    SkewParams skew;
    double cost = 0.0;
    int iterations = 0;
};

struct TrainingResult {
    Alpha alpha;
    SkewParams skew;
    double cost = 0.0;
    ScalarImage reconstruction;
    std::vector<EvaluationRecord> evaluations;
};

/// Dense sweep of the cost over an (s, t) grid at frozen alpha.
/// costs is row-major with one row per s value and one column per t value.
class CostLandscape {
public:
    CostLandscape(std::vector<double> s_values, std::vector<double> t_values,
                  std::vector<double> costs, Alpha alpha)
        : s_values_(std::move(s_values)),
          t_values_(std::move(t_values)),
          costs_(std::move(costs)),
          alpha_(alpha) {
        if (costs_.size() != s_values_.size() * t_values_.size()) {
            throw DimensionError("CostLandscape: cost matrix shape mismatch");
        }
        detail::check_all_finite(costs_, "CostLandscape");
    }

    const std::vector<double>& s_values() const { return s_values_; }
    const std::vector<double>& t_values() const { return t_values_; }
    const std::vector<double>& costs() const { return costs_; }
    const Alpha& alpha() const { return alpha_; }

    double at(std::size_t si, std::size_t ti) const { return costs_[si * t_values_.size() + ti]; }

private:
    std::vector<double> s_values_;
    std::vector<double> t_values_;
    std::vector<double> costs_;
    Alpha alpha_;
};

struct TrainingOptions {
    // Reuse the final dual variables of the previous tuple in a worker's
    // chunk as the next starting point. Off by default: results then no
    // longer match across parallelism degrees.
    bool warm_start_duals = false;
};

/// Runs the Level-2 solve on the noisy image and measures the unsquared
/// L2 distance of the reconstruction to the clean image.
inline CostEvaluation evaluate_cost(const TrainingPair& pair, const Alpha& alpha,
                                    const SkewParams& skew, const SolverConfig& cfg) {
    SolveResult r = solve_level2(pair.noisy, alpha, skewed_gradient_operator(skew), cfg);
    double sq = 0.0;
    auto ru = r.u.values();
    auto cu = pair.clean.values();
    for (std::size_t i = 0; i < ru.size(); ++i) {
        const double d = ru[i] - cu[i];
        sq += d * d;
    }
    return CostEvaluation{std::sqrt(sq), std::move(r.u), std::move(r.diag)};
}

namespace detail {

struct GridIndex {
    std::size_t ia0, ia1, is, it;
};

inline GridIndex unflatten(std::size_t idx, const GridSpec& grid) {
    const std::size_t nt = grid.t_values.size();
    const std::size_t ns = grid.s_values.size();
    const std::size_t na1 = grid.alpha1_values.size();
    GridIndex g;
    g.it = idx % nt;
    idx /= nt;
    g.is = idx % ns;
    idx /= ns;
    g.ia1 = idx % na1;
    idx /= na1;
    g.ia0 = idx;
    return g;
}

} // namespace detail

/// Exhaustive evaluation of every (alpha0, alpha1, s, t) grid tuple.
/// A single failed evaluation aborts the search; the error carries the
/// offending tuple.
inline TrainingResult grid_search(const TrainingPair& pair, const GridSpec& grid,
                                  const SolverConfig& cfg, int parallelism,
                                  const TrainingOptions& options = {}) {
    grid.validate();
    cfg.validate();
    if (parallelism < 1) throw InvalidParameter("grid_search: parallelism must be positive");

    const std::size_t total = grid.tuple_count();
    struct Slot {
        double cost = 0.0;
        int iterations = 0;
        std::exception_ptr error;
    };
    std::vector<Slot> slots(total);

    // The step-size bound depends only on (s, t) and the grid shape, so it
    // is computed once per (s, t) pair. estimate_operator_norm is a pure
    // function of the same inputs, which keeps every solve bit-identical
    // to an uncached evaluate_cost call.
    const std::size_t ns = grid.s_values.size(), nt = grid.t_values.size();
    std::vector<double> norm_bounds(ns * nt);
    for (std::size_t is = 0; is < ns; ++is) {
        for (std::size_t it = 0; it < nt; ++it) {
            norm_bounds[is * nt + it] = estimate_operator_norm(
                skewed_gradient_operator(grid.s_values[is], grid.t_values[it]),
                pair.noisy.height(), pair.noisy.width());
        }
    }

    auto run_range = [&](std::size_t begin, std::size_t end) {
        std::optional<VectorField2> last_p;
        std::optional<MatrixField2> last_q;
        for (std::size_t idx = begin; idx < end; ++idx) {
            const auto g = detail::unflatten(idx, grid);
            try {
                const Alpha alpha(grid.alpha0_values[g.ia0], grid.alpha1_values[g.ia1]);
                const SkewParams skew(grid.s_values[g.is], grid.t_values[g.it]);
                std::optional<VectorField2> fp;
                std::optional<MatrixField2> fq;
                SolveHooks hooks;
                hooks.operator_norm_bound = norm_bounds[g.is * nt + g.it];
                if (options.warm_start_duals) {
                    fp.emplace(pair.noisy.height(), pair.noisy.width());
                    fq.emplace(pair.noisy.height(), pair.noisy.width());
                    hooks.final_p = &*fp;
                    hooks.final_q = &*fq;
                    if (last_p) hooks.initial_p = &*last_p;
                    if (last_q) hooks.initial_q = &*last_q;
                }
                SolveResult r =
                    solve_level2(pair.noisy, alpha, skewed_gradient_operator(skew), cfg, hooks);
                double sq = 0.0;
                auto ru = r.u.values();
                auto cu = pair.clean.values();
                for (std::size_t i = 0; i < ru.size(); ++i) {
                    const double d = ru[i] - cu[i];
                    sq += d * d;
                }
                slots[idx].cost = std::sqrt(sq);
                slots[idx].iterations = r.diag.iterations;
                if (options.warm_start_duals) {
                    last_p = std::move(*fp);
                    last_q = std::move(*fq);
                }
            } catch (...) {
                slots[idx].error = std::current_exception();
            }
        }
    };

    const int workers = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(parallelism), total));
    if (workers <= 1) {
        run_range(0, total);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) {
            const std::size_t begin = total * static_cast<std::size_t>(t) / workers;
            const std::size_t end = total * (static_cast<std::size_t>(t) + 1) / workers;
            threads.emplace_back(run_range, begin, end);
        }
        for (auto& th : threads) th.join();
    }

    // Surface the first (lowest-index) failure with its tuple.
    for (std::size_t idx = 0; idx < total; ++idx) {
        if (!slots[idx].error) continue;
        const auto g = detail::unflatten(idx, grid);
        char ctx[160];
        std::snprintf(ctx, sizeof(ctx),
                      "grid_search: evaluation failed at (alpha0=%g, alpha1=%g, s=%g, t=%g): ",
                      grid.alpha0_values[g.ia0], grid.alpha1_values[g.ia1], grid.s_values[g.is],
                      grid.t_values[g.it]);
        try {
            std::rethrow_exception(slots[idx].error);
        } catch (const std::exception& e) {
            throw Error(std::string(ctx) + e.what());
        }
    }

    // Lexicographic enumeration + strict comparison = lexicographically
    // smallest minimizer.
    std::size_t best = 0;
    for (std::size_t idx = 1; idx < total; ++idx) {
        if (slots[idx].cost < slots[best].cost) best = idx;
    }
    const auto gb = detail::unflatten(best, grid);
    const Alpha best_alpha(grid.alpha0_values[gb.ia0], grid.alpha1_values[gb.ia1]);
    const SkewParams best_skew(grid.s_values[gb.is], grid.t_values[gb.it]);

    // Re-solve the winning tuple for the reconstruction; the solve is
    // deterministic, so this reproduces the recorded cost exactly.
    CostEvaluation best_ev = evaluate_cost(pair, best_alpha, best_skew, cfg);

    TrainingResult result{best_alpha, best_skew, slots[best].cost, std::move(best_ev.reconstruction), {}};
    result.evaluations.reserve(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
        const auto g = detail::unflatten(idx, grid);
        result.evaluations.push_back(EvaluationRecord{
            Alpha(grid.alpha0_values[g.ia0], grid.alpha1_values[g.ia1]),
            SkewParams(grid.s_values[g.is], grid.t_values[g.it]),
            slots[idx].cost,
            slots[idx].iterations,
        });
    }
    return result;
}

/// Dense cost evaluation over an (s, t) grid at frozen alpha.
inline CostLandscape cost_landscape(const TrainingPair& pair, const Alpha& alpha,
                                    const std::vector<double>& s_values,
                                    const std::vector<double>& t_values, const SolverConfig& cfg,
                                    int parallelism = 1) {
    if (parallelism < 1) throw InvalidParameter("cost_landscape: parallelism must be positive");
    // Reuse GridSpec validation for the (s, t) lists.
    (void)GridSpec({alpha.alpha0}, {alpha.alpha1}, s_values, t_values);

    const std::size_t ns = s_values.size(), nt = t_values.size();
    const std::size_t total = ns * nt;
    std::vector<double> costs(total, 0.0);
    std::vector<std::exception_ptr> errors(total);

    std::vector<double> norm_bounds(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
        norm_bounds[idx] = estimate_operator_norm(
            skewed_gradient_operator(s_values[idx / nt], t_values[idx % nt]),
            pair.noisy.height(), pair.noisy.width());
    }

    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            try {
                const SkewParams skew(s_values[idx / nt], t_values[idx % nt]);
                SolveHooks hooks;
                hooks.operator_norm_bound = norm_bounds[idx];
                SolveResult r =
                    solve_level2(pair.noisy, alpha, skewed_gradient_operator(skew), cfg, hooks);
                double sq = 0.0;
                auto ru = r.u.values();
                auto cu = pair.clean.values();
                for (std::size_t i = 0; i < ru.size(); ++i) {
                    const double d = ru[i] - cu[i];
                    sq += d * d;
                }
                costs[idx] = std::sqrt(sq);
            } catch (...) {
                errors[idx] = std::current_exception();
            }
        }
    };

    const int workers = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(parallelism), total));
    if (workers <= 1) {
        run_range(0, total);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) {
            const std::size_t begin = total * static_cast<std::size_t>(t) / workers;
            const std::size_t end = total * (static_cast<std::size_t>(t) + 1) / workers;
            threads.emplace_back(run_range, begin, end);
        }
        for (auto& th : threads) th.join();
    }

    for (std::size_t idx = 0; idx < total; ++idx) {
        if (!errors[idx]) continue;
        try {
            std::rethrow_exception(errors[idx]);
        } catch (const std::exception& e) {
            throw Error(std::string("cost_landscape: evaluation failed at (s=") +
                        std::to_string(s_values[idx / nt]) + ", t=" +
                        std::to_string(t_values[idx % nt]) + "): " + e.what());
        }
    }

    return CostLandscape(s_values, t_values, std::move(costs), alpha);
}

namespace detail {

inline std::string format_g9(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return std::string(buf);
}

} // namespace detail

/// Serializes a landscape as tab-separated text: header row
/// "s\t<t values...>", then one row per s value. 9 significant digits,
/// LF line endings.
inline std::string landscape_to_csv(const CostLandscape& ls) {
    std::string out = "s";
    for (double t : ls.t_values()) {
        out += '\t';
        out += detail::format_g9(t);
    }
    out += '\n';
    for (std::size_t si = 0; si < ls.s_values().size(); ++si) {
        out += detail::format_g9(ls.s_values()[si]);
        for (std::size_t ti = 0; ti < ls.t_values().size(); ++ti) {
            out += '\t';
            out += detail::format_g9(ls.at(si, ti));
        }
        out += '\n';
    }
    return out;
}

inline void save_landscape_csv(const CostLandscape& ls, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_landscape_csv: cannot open " + path);
    const std::string text = landscape_to_csv(ls);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError("save_landscape_csv: write failed for " + path);
}

} // namespace pgv
