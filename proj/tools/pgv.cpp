/* Command-line surface for the library: denoise, train, landscape, noise
 * and seminorm subcommands.
 *
 * Conventions:
 *  - machine-readable key=value lines go to stdout, progress text to stderr
 *  - image paths ending in ".f64" use the exact float sidecar format,
 *    anything else is 8-bit PGM
 *  - exit codes: 0 success, 1 runtime error, 2 flag misuse
 */
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgv/pgv.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

pgv::ScalarImage load_image(const std::string& path) {
    if (path.size() > 4 && path.compare(path.size() - 4, 4, ".f64") == 0) {
        return pgv::load_sidecar(path);
    }
    return pgv::load_pgm(path);
}

void save_image(const pgv::ScalarImage& img, const std::string& path) {
    if (path.size() > 4 && path.compare(path.size() - 4, 4, ".f64") == 0) {
        pgv::save_sidecar(img, path);
        return;
    }
    pgv::save_pgm(img, path);
}

void emit(const char* key, double value) {
    std::printf("%s=%.12g\n", key, value);
}

void emit(const char* key, long long value) {
    std::printf("%s=%lld\n", key, value);
}

struct DenoiseArgs {
    std::string input, output;
    double alpha0 = 0.0, alpha1 = 0.0;
    double s = 0.5, t = 0.5;
    int max_iters = 10000;
    double tol = 1e-5;
};

int run_denoise(const DenoiseArgs& a) {
    const pgv::ScalarImage u_eta = load_image(a.input);
    const pgv::Alpha alpha(a.alpha0, a.alpha1);
    const pgv::SolverConfig cfg(a.max_iters, a.tol);
    pgv::SolveResult r = pgv::solve_level2(
        u_eta, alpha, pgv::skewed_gradient_operator(a.s, a.t), cfg);
    save_image(r.u, a.output);
    emit("objective", r.diag.objective_history.back());
    emit("iterations", static_cast<long long>(r.diag.iterations));
    emit("residual", r.diag.final_residual);
    emit("converged", static_cast<long long>(r.diag.converged ? 1 : 0));
    std::fprintf(stderr, "wrote %s\n", a.output.c_str());
    return 0;
}

struct TrainArgs {
    std::string clean, noisy, grid_config, out_json, out_image;
    int parallelism = 1;
    int max_iters = -1;
    double tol = -1.0;
};

int run_train(const TrainArgs& a) {
    const pgv::ScalarImage clean = load_image(a.clean);
    const pgv::ScalarImage noisy = load_image(a.noisy);
    const pgv::TrainingPair pair(clean, noisy);

    pgv::RunConfig run;
    if (!a.grid_config.empty()) run = pgv::load_config(a.grid_config);
    if (a.max_iters > 0) run.solver.max_iters = a.max_iters;
    if (a.tol > 0.0) run.solver.tolerance = a.tol;
    run.solver.validate();

    std::fprintf(stderr, "grid: %zu tuples, parallelism %d\n", run.grid.tuple_count(),
                 a.parallelism);
    pgv::TrainingResult r = pgv::grid_search(pair, run.grid, run.solver, a.parallelism);

    ordered_json doc;
    doc["optimum"] = {{"alpha0", r.alpha.alpha0},
                      {"alpha1", r.alpha.alpha1},
                      {"s", r.skew.s},
                      {"t", r.skew.t},
                      {"cost", r.cost}};
    doc["evaluations"] = ordered_json::array();
    for (const auto& ev : r.evaluations) {
        doc["evaluations"].push_back({{"alpha0", ev.alpha.alpha0},
                                      {"alpha1", ev.alpha.alpha1},
                                      {"s", ev.skew.s},
                                      {"t", ev.skew.t},
                                      {"cost", ev.cost},
                                      {"iterations", ev.iterations}});
    }
    if (!a.out_json.empty()) {
        std::ofstream f(a.out_json, std::ios::binary);
        if (!f) throw pgv::IoError("cannot open " + a.out_json + " for writing");
        const std::string text = doc.dump(2);
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
        f.put('\n');
        if (!f) throw pgv::IoError("write failed for " + a.out_json);
    }
    if (!a.out_image.empty()) save_image(r.reconstruction, a.out_image);

    emit("alpha0", r.alpha.alpha0);
    emit("alpha1", r.alpha.alpha1);
    emit("s", r.skew.s);
    emit("t", r.skew.t);
    emit("cost", r.cost);
    return 0;
}

struct LandscapeArgs {
    std::string clean, noisy, out;
    double alpha0 = 0.0, alpha1 = 0.0;
    std::vector<double> s_values, t_values;
    int parallelism = 1;
    int max_iters = 10000;
    double tol = 1e-5;
};

int run_landscape(const LandscapeArgs& a) {
    const pgv::TrainingPair pair(load_image(a.clean), load_image(a.noisy));
    const pgv::Alpha alpha(a.alpha0, a.alpha1);
    const pgv::SolverConfig cfg(a.max_iters, a.tol);
    pgv::CostLandscape ls =
        pgv::cost_landscape(pair, alpha, a.s_values, a.t_values, cfg, a.parallelism);
    pgv::save_landscape_csv(ls, a.out);
    double mn = ls.costs().front(), mx = ls.costs().front();
    for (double c : ls.costs()) {
        mn = std::min(mn, c);
        mx = std::max(mx, c);
    }
    emit("rows", static_cast<long long>(ls.s_values().size()));
    emit("cols", static_cast<long long>(ls.t_values().size()));
    emit("min_cost", mn);
    emit("max_cost", mx);
    std::fprintf(stderr, "wrote %s\n", a.out.c_str());
    return 0;
}

struct NoiseArgs {
    std::string input, output, sidecar;
    double sigma = 25.0;
    std::uint64_t seed = 0;
};

int run_noise(const NoiseArgs& a) {
    const pgv::ScalarImage img = load_image(a.input);
    const pgv::ScalarImage noisy = pgv::add_gaussian_noise(img, pgv::NoiseSpec(a.sigma, a.seed));
    save_image(noisy, a.output);
    if (!a.sidecar.empty()) pgv::save_sidecar(noisy, a.sidecar);
    emit("sigma", a.sigma);
    emit("seed", static_cast<long long>(a.seed));
    return 0;
}

struct SeminormArgs {
    std::string input;
    double alpha0 = 0.0, alpha1 = 0.0;
    double s = 0.5, t = 0.5;
    // the frozen-image inner problem certifies its residual more slowly
    // than the full reconstruction, so it gets a higher default cap
    int max_iters = 100000;
    double tol = 1e-6;
};

int run_seminorm(const SeminormArgs& a) {
    const pgv::ScalarImage u = load_image(a.input);
    const pgv::Alpha alpha(a.alpha0, a.alpha1);
    const pgv::SolverConfig cfg(a.max_iters, a.tol);
    pgv::Pgv2Result r = pgv::pgv2(u, alpha, pgv::skewed_gradient_operator(a.s, a.t), cfg);
    emit("tv", pgv::tv(u));
    emit("pgv2", r.value);
    emit("iterations", static_cast<long long>(r.diag.iterations));
    emit("converged", static_cast<long long>(r.diag.converged ? 1 : 0));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PDE-constrained generalized-variation denoising and training"};
    app.require_subcommand(1);

    DenoiseArgs dn;
    CLI::App* denoise = app.add_subcommand("denoise", "reconstruct one image");
    denoise->add_option("--input", dn.input, "input image (PGM or .f64)")->required();
    denoise->add_option("--output", dn.output, "output image path")->required();
    denoise->add_option("--alpha0", dn.alpha0, "first-order weight")->required();
    denoise->add_option("--alpha1", dn.alpha1, "second-order weight")->required();
    denoise->add_option("--s", dn.s, "operator parameter s")->check(CLI::Range(0.0, 1.0));
    denoise->add_option("--t", dn.t, "operator parameter t")->check(CLI::Range(0.0, 1.0));
    denoise->add_option("--max-iters", dn.max_iters, "iteration cap")
        ->check(CLI::PositiveNumber);
    denoise->add_option("--tol", dn.tol, "relative residual tolerance")
        ->check(CLI::PositiveNumber);

    TrainArgs tr;
    CLI::App* train = app.add_subcommand("train", "grid-search the optimal tuple");
    train->add_option("--clean", tr.clean, "clean training image")->required();
    train->add_option("--noisy", tr.noisy, "noisy training image")->required();
    train->add_option("--grid-config", tr.grid_config, "run configuration file");
    train->add_option("--parallelism", tr.parallelism, "worker count")
        ->check(CLI::PositiveNumber);
    train->add_option("--out-json", tr.out_json, "result file (JSON)");
    train->add_option("--out-image", tr.out_image, "optimal reconstruction image");
    train->add_option("--max-iters", tr.max_iters, "override solver.max_iters");
    train->add_option("--tol", tr.tol, "override solver.tolerance");

    LandscapeArgs ld;
    CLI::App* landscape = app.add_subcommand("landscape", "cost sweep over (s,t)");
    landscape->add_option("--clean", ld.clean)->required();
    landscape->add_option("--noisy", ld.noisy)->required();
    landscape->add_option("--alpha0", ld.alpha0)->required();
    landscape->add_option("--alpha1", ld.alpha1)->required();
    landscape->add_option("--s-values", ld.s_values, "comma-separated s grid")
        ->required()
        ->delimiter(',');
    landscape->add_option("--t-values", ld.t_values, "comma-separated t grid")
        ->required()
        ->delimiter(',');
    landscape->add_option("--out", ld.out, "output CSV path")->required();
    landscape->add_option("--parallelism", ld.parallelism)->check(CLI::PositiveNumber);
    landscape->add_option("--max-iters", ld.max_iters)->check(CLI::PositiveNumber);
    landscape->add_option("--tol", ld.tol)->check(CLI::PositiveNumber);

    NoiseArgs no;
    CLI::App* noise = app.add_subcommand("noise", "add seeded Gaussian noise");
    noise->add_option("--input", no.input)->required();
    noise->add_option("--output", no.output)->required();
    noise->add_option("--sigma", no.sigma, "standard deviation")->required();
    noise->add_option("--seed", no.seed, "generator seed");
    noise->add_option("--sidecar", no.sidecar, "also write the exact floats here");

    SeminormArgs sm;
    CLI::App* seminorm = app.add_subcommand("seminorm", "evaluate tv and pgv2");
    seminorm->add_option("--input", sm.input)->required();
    seminorm->add_option("--alpha0", sm.alpha0)->required();
    seminorm->add_option("--alpha1", sm.alpha1)->required();
    seminorm->add_option("--s", sm.s)->check(CLI::Range(0.0, 1.0));
    seminorm->add_option("--t", sm.t)->check(CLI::Range(0.0, 1.0));
    seminorm->add_option("--max-iters", sm.max_iters)->check(CLI::PositiveNumber);
    seminorm->add_option("--tol", sm.tol)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(denoise)) return run_denoise(dn);
        if (app.got_subcommand(train)) return run_train(tr);
        if (app.got_subcommand(landscape)) return run_landscape(ld);
        if (app.got_subcommand(noise)) return run_noise(no);
        if (app.got_subcommand(seminorm)) return run_seminorm(sm);
    } catch (const pgv::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 2;
}
