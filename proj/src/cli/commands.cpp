#include "grnmf/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "grnmf/metrics.hpp"
#include "grnmf/parallel.hpp"
#include "grnmf/rng.hpp"

namespace grnmf::cli {

using json = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw ParseError("failed writing " + path.string());
}

Matrix mask_matrix(const std::vector<bool>& mask) {
    Matrix m(static_cast<Index>(mask.size()), 1);
    for (std::size_t i = 0; i < mask.size(); ++i) m(static_cast<Index>(i), 0) = mask[i] ? 1.0 : 0.0;
    return m;
}

std::vector<bool> mask_vector(const Matrix& m) {
    if (m.cols() != 1 && m.rows() != 1) throw DimensionMismatch("outlier mask must be a vector");
    std::vector<bool> out(static_cast<std::size_t>(m.size()));
    for (Index i = 0; i < m.size(); ++i) out[static_cast<std::size_t>(i)] = m.data()[i] != 0.0;
    return out;
}

const char* policy_name(ExponentPolicy p) { return p == ExponentPolicy::TableOne ? "table-one" : "over-relaxed"; }

ExponentPolicy parse_policy(const std::string& s) {
    if (s == "table-one") return ExponentPolicy::TableOne;
    if (s == "over-relaxed") return ExponentPolicy::OverRelaxed;
    throw ConfigError("unknown policy '" + s + "' (expected table-one or over-relaxed)");
}

// 5% style perturbation: each entry scaled by (1 + s u), u uniform on (-1, 1).
Matrix perturbed(const Matrix& X, double s, Rng& rng) {
    Matrix out = X;
    if (s == 0.0) return out;
    for (Index i = 0; i < out.size(); ++i) out.data()[i] *= 1.0 + s * (2.0 * uniform_open01(rng) - 1.0);
    return out;
}

} // namespace

fs::path find_matrix(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".bin", ".csv"}) {
        fs::path p = dir / (stem + ext);
        if (fs::exists(p)) return p;
    }
    throw ParseError("no " + stem + ".bin or " + stem + ".csv in " + dir.string());
}

std::string report_json(const SolveReport& report, const SolverConfig& config, Index K) {
    json j;
    j["K"] = K;
    j["beta"] = config.beta.value();
    j["lambda"] = report.lambda;
    j["lambda_auto"] = !config.lambda.has_value();
    j["tol"] = config.tol;
    j["max_iter"] = config.max_iter;
    j["policy"] = policy_name(config.policy);
    j["seed"] = config.seed;
    j["stop"] = to_string(report.stop);
    j["iterations"] = report.iterations;
    j["initial_objective"] = report.initial_objective;
    j["final_relative_decrease"] = report.final_relative_decrease;
    j["l21"] = l21_norm(report.state.R());
    j["objective_trace"] = report.objective_trace;
    return j.dump(2) + "\n";
}

SolveReport cmd_unmix(const UnmixOptions& opt) {
    const Matrix Y = read_matrix(opt.input);
    SolverConfig cfg = opt.solver;
    switch (opt.init) {
    case UnmixOptions::Init::Random: cfg.init = InitSpec::random_uniform(); break;
    case UnmixOptions::Init::Dirichlet: cfg.init = InitSpec::dirichlet(1.0); break;
    case UnmixOptions::Init::FromTruth: {
        if (opt.truth_dir.empty()) throw ConfigError("--init from-truth needs --truth DIR");
        Matrix M = read_matrix(find_matrix(opt.truth_dir, "M_true").string());
        Matrix A = read_matrix(find_matrix(opt.truth_dir, "A_true").string());
        if (M.cols() != opt.K) throw DimensionMismatch("truth has " + std::to_string(M.cols()) + " endmembers, K is " +
                                                       std::to_string(opt.K));
        Rng rng(substream_seed(cfg.seed, 0x7e57));
        M = perturbed(M, opt.perturb, rng);
        A = perturbed(A, opt.perturb, rng);
        // truncated-simplex truths do not sum to one, solver states must
        for (Index p = 0; p < A.cols(); ++p) {
            const double s = A.col(p).sum();
            if (s > 0.0) A.col(p) /= s;
            else A.col(p).setConstant(1.0 / static_cast<double>(A.rows()));
        }
        cfg.init = InitSpec::from_matrices(std::move(M), std::move(A));
        break;
    }
    }
    SolveReport report = solve(Y, opt.K, cfg);

    const fs::path dir(opt.out_dir);
    fs::create_directories(dir);
    const std::string ext = extension(opt.format);
    write_matrix((dir / ("M" + ext)).string(), report.state.M(), opt.format);
    write_matrix((dir / ("A" + ext)).string(), report.state.A(), opt.format);
    write_matrix((dir / ("R" + ext)).string(), report.state.R(), opt.format);
    write_matrix((dir / ("energy" + ext)).string(), Matrix(energy_vector(report.state.R())), opt.format);
    write_text(dir / "report.json", report_json(report, cfg, opt.K));
    json t;
    t["wall_seconds"] = report.wall_seconds;
    t["seconds_per_iteration"] =
        report.iterations ? report.wall_seconds / static_cast<double>(report.iterations) : 0.0;
    write_text(dir / "timings.json", t.dump(2) + "\n");
    return report;
}

Scene cmd_generate(const GenerateOptions& opt) {
    SceneSpec spec = opt.scene;
    Matrix source;
    if (!opt.endmembers.empty()) {
        source = load_endmember_library(opt.endmembers);
        if (source.rows() != spec.L || source.cols() != spec.K)
            throw DimensionMismatch(opt.endmembers + " is " + std::to_string(source.rows()) + "x" +
                                    std::to_string(source.cols()) + ", expected " + std::to_string(spec.L) + "x" +
                                    std::to_string(spec.K));
    } else {
        source = smooth_spectra(spec.L, spec.K, substream_seed(spec.seed, 0xe11d));
    }
    Scene scene = generate(spec, source);

    const fs::path dir(opt.out_dir);
    fs::create_directories(dir);
    const std::string ext = extension(opt.format);
    const GroundTruth& gt = scene.truth;
    write_matrix((dir / ("Y" + ext)).string(), scene.Y, opt.format);
    write_matrix((dir / ("M_true" + ext)).string(), gt.M_true, opt.format);
    write_matrix((dir / ("A_true" + ext)).string(), gt.A_true, opt.format);
    write_matrix((dir / ("mask" + ext)).string(), mask_matrix(gt.nonlinear_mask), opt.format);
    if (gt.B_true.size()) write_matrix((dir / ("B_true" + ext)).string(), gt.B_true, opt.format);
    if (gt.Gamma_true.size()) write_matrix((dir / ("Gamma_true" + ext)).string(), gt.Gamma_true, opt.format);

    json m;
    m["model"] = to_string(spec.model);
    m["L"] = spec.L;
    m["K"] = spec.K;
    m["P"] = spec.P;
    m["snr_db"] = spec.snr_db;
    m["add_noise"] = spec.add_noise;
    m["pure_pixels"] = spec.pure_pixels;
    m["cap"] = spec.cap;
    m["nonlinear_fraction"] = spec.nonlinear_fraction;
    m["nonlinear_pixels"] = std::count(gt.nonlinear_mask.begin(), gt.nonlinear_mask.end(), true);
    m["seed"] = spec.seed;
    m["endmembers"] = opt.endmembers.empty() ? "synthetic" : opt.endmembers;
    m["noise_sigma"] = gt.noise_sigma;
    m["empirical_snr_db"] = gt.empirical_snr_db;
    m["clamped_fraction"] = gt.clamped_fraction;
    write_text(dir / "manifest.json", m.dump(2) + "\n");
    return scene;
}

EvalRow evaluate(const Matrix& M_true, const Matrix& A_true, const std::vector<bool>& mask, const Matrix& M,
                 const Matrix& A, const Matrix& R, std::optional<double> threshold) {
    if (A_true.cols() != A.cols() || R.cols() != A.cols())
        throw DimensionMismatch("truth and estimates disagree on the pixel count");
    const Alignment al = align_endmembers(M_true, M, A);
    EvalRow row;
    row.asam = asam(M_true, al.M);
    row.gmse2 = gmse_sq(A_true, al.A);
    const Vector e = energy_vector(R);
    const DetectionScores s = outlier_detection_scores(e, mask, threshold ? *threshold : otsu_threshold(e));
    row.precision = s.precision;
    row.recall = s.recall;
    row.f1 = s.f1;
    row.l21 = l21_norm(R);
    return row;
}

EvalRow cmd_evaluate(const std::string& truth_dir, const std::string& estimates_dir, std::optional<double> threshold) {
    const Matrix M_true = read_matrix(find_matrix(truth_dir, "M_true").string());
    const Matrix A_true = read_matrix(find_matrix(truth_dir, "A_true").string());
    const std::vector<bool> mask = mask_vector(read_matrix(find_matrix(truth_dir, "mask").string()));
    const Matrix M = read_matrix(find_matrix(estimates_dir, "M").string());
    const Matrix A = read_matrix(find_matrix(estimates_dir, "A").string());
    const Matrix R = read_matrix(find_matrix(estimates_dir, "R").string());
    return evaluate(M_true, A_true, mask, M, A, R, threshold);
}

std::string eval_csv_row(const EvalRow& r) {
    return format_double(r.asam) + "," + format_double(r.gmse2) + "," + format_double(r.precision) + "," +
           format_double(r.recall) + "," + format_double(r.f1) + "," + format_double(r.l21);
}

std::vector<double> parse_number_list(const std::string& text) {
    auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ConfigError("cannot parse number '" + s + "' in '" + text + "'");
        }
        if (used != s.size() || !std::isfinite(v)) throw ConfigError("cannot parse number '" + s + "' in '" + text + "'");
        return v;
    };
    std::vector<std::string> parts;
    const char sep = text.find(':') != std::string::npos ? ':' : ',';
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, sep);) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        parts.push_back(item);
    }
    std::vector<double> out;
    if (sep == ':') {
        if (parts.size() != 3) throw ConfigError("range '" + text + "' must be start:step:stop");
        const double a = number(parts[0]), step = number(parts[1]), b = number(parts[2]);
        if (!(step > 0.0) || b < a) throw ConfigError("range '" + text + "' needs step > 0 and stop >= start");
        const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
        for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
    } else {
        for (const auto& p : parts) out.push_back(number(p));
    }
    if (out.empty()) throw ConfigError("empty list '" + text + "'");
    return out;
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
    std::string s = std::string(kSweepHeader) + "\n";
    for (const auto& c : cells) {
        std::string err = c.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        s += format_double(c.beta) + "," + std::to_string(c.restart) + "," + format_double(c.fraction_observed) + "," +
             (c.error.empty() ? format_double(c.heldout_asam) : std::string("nan")) + "," +
             std::to_string(c.iterations) + "," + (c.monotone ? "1" : "0") + "," + err + "\n";
    }
    return s;
}

std::vector<SweepCell> cmd_interpolate(const InterpolateOptions& opt, std::ostream& out) {
    const Matrix Y = read_matrix(opt.input);
    std::vector<SweepCell> cells = beta_sweep(Y, opt.K, opt.sweep);
    const std::string csv = sweep_csv(cells);
    if (opt.out.empty()) {
        out << csv;
    } else {
        const fs::path p(opt.out);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        write_text(p, csv);
    }
    return cells;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Group-robust NMF for hyperspectral unmixing", "grnmf"};
    app.require_subcommand(1);

    // unmix
    UnmixOptions u;
    std::string u_init = "random", u_policy = "table-one", u_format = "bin";
    double u_lambda = 0.0;
    bool u_lambda_auto = false;
    auto* unmix = app.add_subcommand("unmix", "Estimate M, A and R from a data matrix");
    unmix->add_option("input", u.input, "L x P data matrix")->required();
    unmix->add_option("-K,--K", u.K, "number of endmembers")->required()->check(CLI::PositiveNumber);
    double u_beta = 2.0;
    unmix->add_option("--beta", u_beta, "divergence parameter")->capture_default_str();
    auto* lam = unmix->add_option("--lambda", u_lambda, "penalty weight")->check(CLI::NonNegativeNumber);
    unmix->add_flag("--lambda-auto", u_lambda_auto, "use lambda0 = C(K)/mean(Y) (default)")->excludes(lam);
    unmix->add_option("--tol", u.solver.tol, "relative decrease threshold")->capture_default_str();
    unmix->add_option("--max-iter", u.solver.max_iter, "iteration cap")->capture_default_str();
    unmix->add_option("--policy", u_policy, "table-one or over-relaxed")->capture_default_str();
    unmix->add_option("--seed", u.solver.seed, "random seed")->capture_default_str();
    unmix->add_option("--init", u_init, "random, dirichlet or from-truth")->capture_default_str();
    unmix->add_option("--truth", u.truth_dir, "ground truth directory for --init from-truth");
    unmix->add_option("--perturb", u.perturb, "relative perturbation of the truth")->capture_default_str();
    unmix->add_option("--threads", u.solver.threads, "threads inside one solve")->capture_default_str();
    unmix->add_option("--out-dir", u.out_dir, "output directory")->capture_default_str();
    unmix->add_option("--format", u_format, "bin or csv")->capture_default_str();

    // generate
    GenerateOptions g;
    std::string g_model = "lmm", g_format = "bin";
    Index g_width = 0, g_height = 0;
    auto* gen = app.add_subcommand("generate", "Synthesize a scene and its ground truth");
    gen->add_option("--model", g_model, "lmm, nm, fm or gbm")->capture_default_str();
    gen->add_option("--L", g.scene.L, "bands")->capture_default_str();
    gen->add_option("--K", g.scene.K, "endmembers")->capture_default_str();
    auto* gp = gen->add_option("--P", g.scene.P, "pixels")->capture_default_str();
    gen->add_option("--width", g_width, "image width")->excludes(gp);
    gen->add_option("--height", g_height, "image height")->excludes(gp);
    gen->add_option("--snr-db", g.scene.snr_db, "signal to noise ratio in dB")->capture_default_str();
    gen->add_option("--pure-pixels", g.scene.pure_pixels, "false draws on the truncated simplex")
        ->capture_default_str();
    gen->add_option("--nonlinear-fraction", g.scene.nonlinear_fraction, "fraction of nonlinear pixels")
        ->capture_default_str();
    gen->add_option("--endmembers", g.endmembers, "L x K spectra file");
    gen->add_option("--seed", g.scene.seed, "random seed")->capture_default_str();
    gen->add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
    gen->add_option("--format", g_format, "bin or csv")->capture_default_str();

    // evaluate
    std::string e_truth, e_est, e_out;
    std::optional<double> e_threshold;
    auto* ev = app.add_subcommand("evaluate", "Score estimates against a ground truth bundle");
    ev->add_option("truth", e_truth, "ground truth directory")->required();
    ev->add_option("estimates", e_est, "estimates directory")->required();
    ev->add_option("--threshold", e_threshold, "energy threshold (default: Otsu)");
    ev->add_option("--out", e_out, "CSV file (default: standard output)");

    // interpolate
    InterpolateOptions ip;
    ip.sweep.betas = default_beta_grid();
    ip.sweep.observe_fractions = {0.25, 0.5, 0.75};
    ip.sweep.jobs = default_jobs();
    std::string ip_fractions, ip_grid;
    auto* inter = app.add_subcommand("interpolate", "Pick beta by reconstructing removed entries");
    inter->add_option("input", ip.input, "L x P data matrix")->required();
    inter->add_option("-K,--K", ip.K, "number of endmembers")->required()->check(CLI::PositiveNumber);
    inter->add_option("--observe-fraction", ip_fractions, "observed fractions (default 0.25,0.5,0.75)");
    inter->add_option("--beta-grid", ip_grid, "start:step:stop or a list (default -1:0.5:3)");
    inter->add_option("--restarts", ip.sweep.restarts, "runs per beta")->capture_default_str();
    inter->add_option("--seed", ip.sweep.seed, "random seed")->capture_default_str();
    inter->add_option("--tol", ip.sweep.base.tol, "relative decrease threshold")->capture_default_str();
    inter->add_option("--max-iter", ip.sweep.base.max_iter, "iteration cap")->capture_default_str();
    inter->add_option("--jobs", ip.sweep.jobs, "worker threads");
    inter->add_option("--out", ip.out, "CSV file (default: standard output)");

    // experiment
    std::string x_spec;
    unsigned x_jobs = default_jobs();
    auto* exp = app.add_subcommand("experiment", "Run a sweep described by a spec file");
    exp->add_option("spec", x_spec, "experiment spec (INI)")->required();
    exp->add_option("--jobs", x_jobs, "worker threads");

    auto format_of = [](const std::string& s) {
        if (s == "bin") return MatrixFormat::Binary;
        if (s == "csv") return MatrixFormat::Csv;
        throw ConfigError("unknown format '" + s + "' (expected bin or csv)");
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitConfig;
    }

    try {
        if (*unmix) {
            u.solver.beta = Beta(u_beta);
            if (lam->count()) u.solver.lambda = u_lambda;
            u.solver.policy = parse_policy(u_policy);
            u.format = format_of(u_format);
            if (u_init == "random") u.init = UnmixOptions::Init::Random;
            else if (u_init == "dirichlet") u.init = UnmixOptions::Init::Dirichlet;
            else if (u_init == "from-truth") u.init = UnmixOptions::Init::FromTruth;
            else throw ConfigError("unknown init '" + u_init + "'");
            u.solver.check();
            const SolveReport r = cmd_unmix(u);
            out << "stop=" << to_string(r.stop) << " iterations=" << r.iterations << " lambda=" << r.lambda
                << " objective=" << (r.objective_trace.empty() ? r.initial_objective : r.objective_trace.back())
                << "\n";
        } else if (*gen) {
            g.scene.model = parse_mixing_model(g_model);
            g.format = format_of(g_format);
            if (g_width || g_height) {
                if (g_width < 1 || g_height < 1) throw ConfigError("--width and --height go together");
                g.scene.P = g_width * g_height;
            }
            const Scene s = cmd_generate(g);
            out << "wrote " << s.Y.rows() << "x" << s.Y.cols() << " scene, empirical SNR "
                << s.truth.empirical_snr_db << " dB\n";
        } else if (*ev) {
            const EvalRow row = cmd_evaluate(e_truth, e_est, e_threshold);
            const std::string csv = std::string(kEvalHeader) + "\n" + eval_csv_row(row) + "\n";
            if (e_out.empty()) out << csv;
            else write_text(e_out, csv);
        } else if (*inter) {
            if (!ip_fractions.empty()) ip.sweep.observe_fractions = parse_number_list(ip_fractions);
            if (!ip_grid.empty()) ip.sweep.betas = parse_number_list(ip_grid);
            for (double f : ip.sweep.observe_fractions)
                if (!(f > 0.0 && f < 1.0))
                    throw ConfigError("--observe-fraction must lie in (0, 1): nothing would be held out");
            cmd_interpolate(ip, out);
        } else if (*exp) {
            const ExperimentSummary s = cmd_experiment(load_experiment_spec(x_spec), x_jobs);
            out << s.cells << " cells, " << s.failed << " failed, " << s.aggregate_rows << " aggregate rows\n";
        }
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const DimensionMismatch& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const NumericalFailure& e) {
        err << "numerical failure at iteration " << e.iteration() << ": " << e.what() << "\n";
        return kExitNumerical;
    } catch (const DomainError& e) {
        err << "domain error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}

} // namespace grnmf::cli
