#include "grnmf/cli.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "grnmf/metrics.hpp"
#include "grnmf/parallel.hpp"
#include "grnmf/rng.hpp"

namespace grnmf::cli {

using json = nlohmann::ordered_json;
namespace pt = boost::property_tree;

namespace {

std::vector<std::string> split_list(const std::string& key, const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty()) throw ConfigError("sweep axis '" + key + "' has an empty entry");
        out.push_back(item);
    }
    if (out.empty()) throw ConfigError("sweep axis '" + key + "' is empty");
    return out;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

double parse_double(const std::string& key, const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": cannot parse number '" + s + "'");
}

template <class T>
T get(const pt::ptree& tree, const std::string& path, T fallback) {
    try {
        return tree.get<T>(path, fallback);
    } catch (const pt::ptree_bad_data&) {
        throw ConfigError(path + ": invalid value '" + tree.get<std::string>(path) + "'");
    }
}

std::string label(double v) { return format_double(v); }

std::string lambda_label(const std::optional<double>& l) { return l ? format_double(*l) : "auto"; }

struct Cell {
    MixingModel model;
    Index K;
    bool pure;
    double beta;
    std::optional<double> lambda;
    int restart;
    std::size_t scene_index; ///< position of (model, K, pure) in the sweep
    std::size_t group;       ///< aggregate row

    std::string name() const {
        return std::string(to_string(model)) + "_K" + std::to_string(K) + (pure ? "_pure" : "_nopure") + "_b" +
               label(beta) + "_l" + lambda_label(lambda) + "_r" + std::to_string(restart);
    }
};

struct CellResult {
    bool ok = false;
    EvalRow row;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    out << text;
}

Matrix perturbed(const Matrix& X, double s, Rng& rng) {
    Matrix out = X;
    for (Index i = 0; i < out.size(); ++i) out.data()[i] *= 1.0 + s * (2.0 * uniform_open01(rng) - 1.0);
    return out;
}

CellResult run_cell(const ExperimentSpec& spec, const Cell& cell, const Matrix& library) {
    const fs::path dir = spec.out_dir / "cells" / cell.name();
    fs::create_directories(dir);

    SceneSpec scene = spec.scene;
    scene.model = cell.model;
    scene.K = cell.K;
    scene.pure_pixels = cell.pure;
    scene.seed = substream_seed(spec.seed, cell.scene_index, static_cast<std::uint64_t>(cell.restart));

    SolverConfig cfg = spec.solver;
    cfg.beta = Beta(cell.beta);
    cfg.lambda = cell.lambda;
    cfg.seed = substream_seed(scene.seed, 0x501e);

    json m;
    m["cell"] = cell.name();
    m["seed"] = {{"scene", scene.seed}, {"solver", cfg.seed}};
    m["config"] = {{"model", to_string(cell.model)},
                   {"K", cell.K},
                   {"pure_pixels", cell.pure},
                   {"L", scene.L},
                   {"P", scene.P},
                   {"snr_db", scene.snr_db},
                   {"nonlinear_fraction", scene.nonlinear_fraction},
                   {"beta", cell.beta},
                   {"lambda", lambda_label(cell.lambda)},
                   {"tol", cfg.tol},
                   {"max_iter", cfg.max_iter}};

    CellResult result;
    try {
        const Matrix source = library.size() ? Matrix(library.leftCols(cell.K))
                                             : smooth_spectra(scene.L, cell.K, substream_seed(scene.seed, 0xe11d));
        const Scene s = generate(scene, source);
        switch (spec.init) {
        case UnmixOptions::Init::Random: cfg.init = InitSpec::random_uniform(); break;
        case UnmixOptions::Init::Dirichlet: cfg.init = InitSpec::dirichlet(1.0); break;
        case UnmixOptions::Init::FromTruth: {
            Rng rng(substream_seed(cfg.seed, 0x7e57));
            Matrix M0 = perturbed(s.truth.M_true, spec.perturb, rng);
            Matrix A0 = perturbed(s.truth.A_true, spec.perturb, rng);
            for (Index p = 0; p < A0.cols(); ++p) A0.col(p) /= A0.col(p).sum();
            cfg.init = InitSpec::from_matrices(std::move(M0), std::move(A0));
            break;
        }
        }
        const SolveReport r = solve(s.Y, cell.K, cfg);
        result.row = evaluate(s.truth.M_true, s.truth.A_true, s.truth.nonlinear_mask, r.state.M(), r.state.A(),
                              r.state.R());
        result.ok = true;
        m["lambda"] = r.lambda;
        m["stop"] = to_string(r.stop);
        m["iterations"] = r.iterations;
        m["final_objective"] = r.objective_trace.empty() ? r.initial_objective : r.objective_trace.back();
        m["metrics"] = {{"asam", result.row.asam},         {"gmse2", result.row.gmse2},
                        {"precision", result.row.precision}, {"recall", result.row.recall},
                        {"f1", result.row.f1},               {"l21", result.row.l21}};
        m["timings"] = {{"wall_seconds", r.wall_seconds}};
        if (spec.save_estimates) {
            write_matrix((dir / "M.bin").string(), r.state.M());
            write_matrix((dir / "A.bin").string(), r.state.A());
            write_matrix((dir / "R.bin").string(), r.state.R());
        }
    } catch (const std::exception& e) {
        m["error"] = e.what();
    }
    write_text(dir / "manifest.json", m.dump(2) + "\n");
    return result;
}

} // namespace

ExperimentSpec parse_experiment_spec(const std::string& text, const fs::path& base_dir) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("experiment spec: ") + e.what());
    }

    ExperimentSpec spec;
    const auto out = get<std::string>(tree, "experiment.out_dir", "");
    if (out.empty()) throw ConfigError("experiment.out_dir is required");
    spec.out_dir = fs::path(out).is_absolute() ? fs::path(out) : base_dir / out;
    spec.restarts = get<int>(tree, "experiment.restarts", 1);
    if (spec.restarts < 1) throw ConfigError("experiment.restarts must be >= 1");
    spec.seed = get<std::uint64_t>(tree, "experiment.seed", 0);
    spec.save_estimates = parse_bool("experiment.save_estimates", get<std::string>(tree, "experiment.save_estimates", "false"));

    spec.scene.L = get<Index>(tree, "scene.L", spec.scene.L);
    const Index width = get<Index>(tree, "scene.width", 0);
    const Index height = get<Index>(tree, "scene.height", 0);
    spec.scene.P = get<Index>(tree, "scene.P", spec.scene.P);
    if (width || height) {
        if (width < 1 || height < 1) throw ConfigError("scene.width and scene.height go together");
        spec.scene.P = width * height;
    }
    spec.scene.snr_db = get<double>(tree, "scene.snr_db", spec.scene.snr_db);
    spec.scene.nonlinear_fraction = get<double>(tree, "scene.nonlinear_fraction", spec.scene.nonlinear_fraction);
    spec.scene.add_noise = parse_bool("scene.add_noise", get<std::string>(tree, "scene.add_noise", "true"));
    spec.endmembers = get<std::string>(tree, "scene.endmembers", "");
    if (!spec.endmembers.empty()) {
        fs::path p(spec.endmembers);
        if (!p.is_absolute()) p = base_dir / p;
        if (!fs::exists(p)) throw ConfigError("scene.endmembers: no such file " + p.string());
        spec.endmembers = p.string();
    }

    spec.solver.tol = get<double>(tree, "solver.tol", spec.solver.tol);
    spec.solver.max_iter = get<std::size_t>(tree, "solver.max_iter", spec.solver.max_iter);
    const auto policy = get<std::string>(tree, "solver.policy", "table-one");
    if (policy == "table-one") spec.solver.policy = ExponentPolicy::TableOne;
    else if (policy == "over-relaxed") spec.solver.policy = ExponentPolicy::OverRelaxed;
    else throw ConfigError("solver.policy: unknown value '" + policy + "'");
    const auto init = get<std::string>(tree, "solver.init", "random");
    if (init == "random") spec.init = UnmixOptions::Init::Random;
    else if (init == "dirichlet") spec.init = UnmixOptions::Init::Dirichlet;
    else if (init == "from-truth") spec.init = UnmixOptions::Init::FromTruth;
    else throw ConfigError("solver.init: unknown value '" + init + "'");
    spec.perturb = get<double>(tree, "solver.perturb", 0.0);

    auto axis = [&](const std::string& key, const std::string& fallback) {
        return split_list(key, get<std::string>(tree, "sweep." + key, fallback));
    };
    for (const auto& s : axis("model", "lmm")) {
        try {
            spec.models.push_back(parse_mixing_model(s));
        } catch (const ParseError& e) {
            throw ConfigError(std::string("sweep.model: ") + e.what());
        }
    }
    for (const auto& s : axis("K", "3")) {
        const double k = parse_double("sweep.K", s);
        if (k < 1 || k != std::floor(k)) throw ConfigError("sweep.K: '" + s + "' is not a positive integer");
        spec.Ks.push_back(static_cast<Index>(k));
    }
    for (const auto& s : axis("pure_pixels", "true")) spec.pure_pixels.push_back(parse_bool("sweep.pure_pixels", s));
    for (const auto& s : axis("beta", "2")) spec.betas.push_back(parse_double("sweep.beta", s));
    for (const auto& s : axis("lambda", "auto")) {
        if (s == "auto") spec.lambdas.emplace_back(std::nullopt);
        else {
            const double l = parse_double("sweep.lambda", s);
            if (l < 0.0) throw ConfigError("sweep.lambda must be >= 0");
            spec.lambdas.emplace_back(l);
        }
    }

    SceneSpec probe = spec.scene;
    probe.check();
    spec.solver.check();
    return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open experiment spec " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiment_spec(buf.str(), fs::absolute(fs::path(path)).parent_path());
}

ExperimentSummary cmd_experiment(const ExperimentSpec& spec, unsigned jobs) {
    if (spec.models.empty() || spec.Ks.empty() || spec.pure_pixels.empty() || spec.betas.empty() ||
        spec.lambdas.empty())
        throw ConfigError("every sweep axis needs at least one value");

    Matrix library;
    if (!spec.endmembers.empty()) {
        library = load_endmember_library(spec.endmembers);
        for (Index K : spec.Ks)
            if (library.cols() < K)
                throw ConfigError("endmember library has " + std::to_string(library.cols()) + " spectra, sweep needs " +
                                  std::to_string(K));
        if (library.rows() != spec.scene.L)
            throw ConfigError("endmember library has " + std::to_string(library.rows()) + " bands, scene.L is " +
                              std::to_string(spec.scene.L));
    }

    std::vector<Cell> cells;
    std::size_t scene_index = 0, group = 0;
    for (MixingModel model : spec.models)
        for (Index K : spec.Ks)
            for (bool pure : spec.pure_pixels) {
                for (double beta : spec.betas)
                    for (const auto& lambda : spec.lambdas) {
                        for (int r = 0; r < spec.restarts; ++r)
                            cells.push_back({model, K, pure, beta, lambda, r, scene_index, group});
                        ++group;
                    }
                ++scene_index;
            }

    fs::create_directories(spec.out_dir / "cells");
    std::vector<CellResult> results(cells.size());
    parallel_for(cells.size(), jobs, [&](std::size_t i) { results[i] = run_cell(spec, cells[i], library); });

    ExperimentSummary summary;
    summary.cells = cells.size();
    std::string csv = std::string(kAggregateHeader) + "\n";
    for (std::size_t g = 0; g < group; ++g) {
        EvalRow sum;
        int runs = 0, failed = 0;
        const Cell* first = nullptr;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (cells[i].group != g) continue;
            if (!first) first = &cells[i];
            if (!results[i].ok) {
                ++failed;
                continue;
            }
            const EvalRow& r = results[i].row;
            sum.asam += r.asam;
            sum.gmse2 += r.gmse2;
            sum.precision += r.precision;
            sum.recall += r.recall;
            sum.f1 += r.f1;
            sum.l21 += r.l21;
            ++runs;
        }
        summary.failed += static_cast<std::size_t>(failed);
        auto mean = [&](double v) { return runs ? format_double(v / runs) : std::string("nan"); };
        csv += std::string(to_string(first->model)) + "," + std::to_string(first->K) + "," +
               (first->pure ? "true" : "false") + "," + label(first->beta) + "," + lambda_label(first->lambda) + "," +
               std::to_string(runs) + "," + std::to_string(failed) + "," + mean(sum.asam) + "," + mean(sum.gmse2) +
               "," + mean(sum.precision) + "," + mean(sum.recall) + "," + mean(sum.f1) + "," + mean(sum.l21) + "\n";
        ++summary.aggregate_rows;
    }
    write_text(spec.out_dir / "aggregate.csv", csv);
    return summary;
}

} // namespace grnmf::cli
