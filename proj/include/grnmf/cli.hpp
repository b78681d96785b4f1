#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "grnmf/masked.hpp"
#include "grnmf/matrix_io.hpp"
#include "grnmf/solver.hpp"
#include "grnmf/synth.hpp"

namespace grnmf::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
    kExitOk = 0,
    kExitInput = 2,
    kExitNumerical = 3,
    kExitConfig = 4,
};

/// Finds `<dir>/<stem>.bin` or `<dir>/<stem>.csv`; throws ParseError if neither exists.
fs::path find_matrix(const fs::path& dir, const std::string& stem);

struct UnmixOptions {
    std::string input;
    Index K = 3;
    SolverConfig solver;
    enum class Init { Random, Dirichlet, FromTruth } init = Init::Random;
    std::string truth_dir;
    /// Multiplicative perturbation applied to the truth for --init from-truth.
    double perturb = 0.0;
    std::string out_dir = ".";
    MatrixFormat format = MatrixFormat::Binary;
};

/// Solves and writes M, A, R, energy, report.json and timings.json. Nothing
/// is written unless the solve succeeds.
SolveReport cmd_unmix(const UnmixOptions& opt);

/// Deterministic JSON for a solve: config, resolved lambda, trace, stop reason.
/// Wall-clock timings are kept out so reruns compare byte for byte.
std::string report_json(const SolveReport& report, const SolverConfig& config, Index K);

struct GenerateOptions {
    SceneSpec scene;
    std::string endmembers; ///< empty: smooth synthetic spectra
    std::string out_dir = ".";
    MatrixFormat format = MatrixFormat::Binary;
};

/// Writes Y, M_true, A_true, mask, B_true or Gamma_true when present, and manifest.json.
Scene cmd_generate(const GenerateOptions& opt);

struct EvalRow {
    double asam = 0.0;
    double gmse2 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double l21 = 0.0;
};

inline constexpr const char* kEvalHeader = "asam,gmse2,precision,recall,f1,l21";

/// Aligns the estimates to the truth, then scores. Outliers are flagged by
/// the Otsu threshold of the energy vector unless a threshold is given.
EvalRow evaluate(const Matrix& M_true, const Matrix& A_true, const std::vector<bool>& mask, const Matrix& M,
                 const Matrix& A, const Matrix& R, std::optional<double> threshold = std::nullopt);

EvalRow cmd_evaluate(const std::string& truth_dir, const std::string& estimates_dir,
                     std::optional<double> threshold = std::nullopt);

std::string eval_csv_row(const EvalRow& row);

struct InterpolateOptions {
    std::string input;
    Index K = 3;
    SweepSpec sweep;
    std::string out; ///< CSV path, empty writes to the output stream
};

inline constexpr const char* kSweepHeader = "beta,restart,fraction_observed,heldout_asam,iterations,monotone,error";

std::vector<SweepCell> cmd_interpolate(const InterpolateOptions& opt, std::ostream& out);

std::string sweep_csv(const std::vector<SweepCell>& cells);

/// "a:step:b" range or a comma separated list.
std::vector<double> parse_number_list(const std::string& text);

struct ExperimentSpec {
    fs::path out_dir;
    int restarts = 1;
    std::uint64_t seed = 0;
    bool save_estimates = false;

    SceneSpec scene; ///< model, K, pure_pixels and seed are overwritten per cell
    std::string endmembers;

    SolverConfig solver; ///< beta and lambda are overwritten per cell
    UnmixOptions::Init init = UnmixOptions::Init::Random;
    double perturb = 0.0;

    std::vector<MixingModel> models;
    std::vector<Index> Ks;
    std::vector<bool> pure_pixels;
    std::vector<double> betas;
    std::vector<std::optional<double>> lambdas; ///< nullopt is "auto"
};

/// Parses the INI-style spec. Throws ConfigError for empty axes, unknown
/// values or missing referenced files.
ExperimentSpec parse_experiment_spec(const std::string& text, const fs::path& base_dir);
ExperimentSpec load_experiment_spec(const std::string& path);

inline constexpr const char* kAggregateHeader =
    "model,K,pure_pixels,beta,lambda,runs,failed,asam,gmse2,precision,recall,f1,l21";

struct ExperimentSummary {
    std::size_t cells = 0;
    std::size_t failed = 0;
    std::size_t aggregate_rows = 0;
};

/// Runs every cell on a pool of `jobs` workers. Each cell writes only into its
/// own directory; a failing cell records its error in its manifest.
ExperimentSummary cmd_experiment(const ExperimentSpec& spec, unsigned jobs);

/// Full command-line entry point. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace grnmf::cli
