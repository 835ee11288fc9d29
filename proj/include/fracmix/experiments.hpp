#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fracmix/regularity.hpp"

namespace fracmix {

/// Version string baked in at configure time (git describe).
const char* version();

/// Resolved study configuration. Every field carries its default, so a file
/// only has to name f.
///
/// File format: one `key = value` per line, `#` starts a comment. Numbers may
/// carry a factor of pi ("pi", "pi/2", "3*pi/4"). Keys:
///
///   domain            interval | rectangle                      (interval)
///   a, b              interval endpoints                        (0, pi)
///   lx, ly            rectangle extents                         (pi, pi)
///   dirichlet         1D: left | right | left,right             (left)
///                     2D: edge:t0:t1 arcs joined by ';'         (bottom:0:pi/2)
///   family.anchor     edge of the growth anchor                 (left)
///   family.t          anchor coordinate along that edge         (0)
///   family.direction  clockwise | counterclockwise              (clockwise)
///   epsilon           smallest admissible alpha; 0 = |bdry|/20  (0)
///   alphas            comma list; empty = geometric in [eps, |bdry|]
///   sweep.count       number of geometric alphas                (6)
///   s                 order in (1/2, 1)                          (0.75)
///   f                 constant[:c] | mode:k | bump | step | csv:path   (required)
///   n                 nodes per axis; 0 = 257 in 1D, 33 in 2D   (0)
///   modes             eigenpairs kept; 0 = every free node      (0)
///   Y                 cylinder height; 0 = 8/sqrt(lambda_1)     (0)
///   M                 y-levels; 0 = 128 in 1D, 32 in 2D         (0)
///   q                 y-grading exponent                        (2)
///   p                 L^p exponent of the L^inf check           (2)
///   gamma             Hoelder exponent                          (0.4)
///   radius            interface profile R; 0 = 64 h             (0)
///   refine            run the refined equivalence pass          (true)
///   threads           sweep workers; 0 = hardware               (0)
///   seed              RNG seed for sampled quantities           (0xF7AC)
struct StudyConfig {
    DomainSpec domain = DomainSpec::interval(0.0, 3.141592653589793);
    std::string dirichlet;  // empty: left in 1D, bottom:0:lx/2 in 2D
    Edge anchor = Edge::Left;
    double anchor_t = 0.0;
    Direction direction = Direction::Clockwise;
    double epsilon = 0.0;
    std::vector<double> alphas;
    int sweep_count = 6;
    double s = 0.75;
    std::string f;
    int n = 0;
    int modes = 0;
    double Y = 0.0;
    int M = 0;
    double q = 2.0;
    double p = 2.0;
    double gamma = 0.4;
    double radius = 0.0;
    bool refine = true;
    int threads = 0;
    std::uint64_t seed = holder_seed;

    int grid_n() const;
    int levels() const;
    std::string dirichlet_spec() const;
    double resolved_epsilon() const;

    BoundaryPartition partition() const;
    MovingFamily family() const;
    /// The alpha list actually swept (explicit or geometric), ascending.
    std::vector<double> sweep_alphas() const;
};

/// Parses and validates a config. Throws ConfigError naming the offending
/// line, MissingField without f, ExponentViolation for p <= N/(2s).
StudyConfig parse_config(const std::filesystem::path& path);
StudyConfig parse_config_text(const std::string& text);

/// Checks cross-field constraints; parse_config calls it.
void validate(const StudyConfig& cfg);

/// Resolved config with every default spelled out.
nlohmann::json to_json(const StudyConfig& cfg);
/// Same content as `key = value` lines, reparseable by parse_config_text.
std::string to_config_text(const StudyConfig& cfg);

/// Evaluates an f descriptor on the grid. `mode:k` reads the k-th (1-based)
/// basis vector and needs `basis`.
GridFunction evaluate_profile(const std::string& descriptor, const Grid& grid,
                              const EigenBasis* basis = nullptr);

/// Grid, partition, operator and eigenbasis of one configuration.
struct Problem {
    BoundaryPartition partition;
    std::shared_ptr<const Grid> grid;
    StiffnessMass sm;
    std::shared_ptr<const EigenBasis> basis;
    GridFunction f;
};

/// modes = 0 keeps every free node.
Problem build_problem(const StudyConfig& cfg, const BoundaryPartition& part, int modes);
Problem build_problem(const StudyConfig& cfg);

struct EquivalencePass {
    int n = 0;
    int M = 0;
    double Y = 0.0;
    double lambda1 = 0.0;
    double trace_gap = 0.0;     // ||trace U - u_spectral||_inf / ||u_spectral||_inf
    double isometry_gap = 0.0;  // |E(ext u) - ||u||^2_{H^s}| / ||u||^2_{H^s}
    double flux_gap = 0.0;      // ||flux(ext u) - (-Delta)^s u||_inf / ||(-Delta)^s u||_inf
    int cg_iterations = 0;
    double cg_residual = 0.0;
};

struct EquivalenceReport {
    EquivalencePass base;
    std::optional<EquivalencePass> refined;  // n -> 2n-1, M -> 2M, Y -> 2Y
    double refinement_ratio() const;
};

EquivalenceReport run_equivalence(const StudyConfig& cfg);
nlohmann::json to_json(const EquivalenceReport& report);

struct SweepRow {
    double alpha = 0.0;
    double lambda1 = 0.0;
    double cd_upper = 0.0;
    double linf = 0.0;
    double holder_H = 0.0;
    double tau_fit = 0.0;  // NaN when the profile is degenerate
};

struct SweepDiagnostics {
    bool lambda_monotone = false;  // lambda_1 non-decreasing in alpha
    double cd_ratio = 0.0;         // CD_upper(alpha_min) / CD_upper(alpha_max)
    double spearman_H = 0.0;       // rank correlation of H against alpha
    bool holder_endpoints = false; // H(alpha_min) >= H(alpha_max)
};

struct SweepResult {
    std::vector<SweepRow> rows;  // alpha ascending
    SweepDiagnostics diagnostics;
};

SweepRow sweep_row(const StudyConfig& cfg, double alpha);
SweepResult run_alpha_sweep(const StudyConfig& cfg);
SweepDiagnostics diagnose(const std::vector<SweepRow>& rows);
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct InterfaceProfile {
    OscillationProfile profile;
    HolderFit fit;
    double lambda1 = 0.0;
    double Y = 0.0;
    SolverDiagnostics solver;
};

/// Oscillation of the cylinder solution about the first interface point,
/// snapped to its grid node, over rho_i = R 4^-i, i = 0..4.
InterfaceProfile run_interface_profile(const StudyConfig& cfg);
nlohmann::json to_json(const InterfaceProfile& result);

struct LemmaCase {
    std::vector<double> params;  // C0, a, b, phi0  or  C0, alpha, gamma, mu, phi0, r0, ell
    double closed_form = 0.0;
    double recursion = 0.0;      // smallest d whose equality recursion never grows
    double rel_gap = 0.0;
};

struct LemmaCheck {
    std::vector<LemmaCase> b1;
    std::vector<LemmaCase> c7;
    double worst_gap() const;
};

/// Closed-form thresholds of both iteration lemmas against a bisection on the
/// log-space recursion, over `count` seeded random tuples each.
LemmaCheck run_lemma_check(std::uint64_t seed, int count = 20);
nlohmann::json to_json(const LemmaCheck& check);

/// Fixed header: alpha,lambda1,cd_upper,linf,holder_H,tau_fit.
std::string sweep_csv(const std::vector<SweepRow>& rows);
nlohmann::json sweep_json(const SweepResult& result, const StudyConfig& cfg);

enum class OutputFormat { Csv, Json };
OutputFormat format_from_string(const std::string& name);

/// Writes sweep.csv or sweep.json under `dir`, plus sweep.config with the
/// resolved config (the CSV itself is header + rows only). Throws NoData for
/// an empty table and IoError when a file cannot be written.
std::filesystem::path emit_results(const SweepResult& result, const StudyConfig& cfg,
                                   OutputFormat format, const std::filesystem::path& dir);

/// {"version", "config", <key>: payload}.
nlohmann::json envelope(const StudyConfig& cfg, const std::string& key, nlohmann::json payload);

/// Eigenvalue table `j,lambda`; each eigenvector goes through field_csv.
std::string basis_csv(const EigenBasis& basis);
/// {"n", "x", ["y"], "eigenvalues", "vectors": [[...], ...]}.
nlohmann::json basis_json(const EigenBasis& basis);
std::string field_csv(const GridFunction& u, const Grid& grid);
nlohmann::json field_json(const GridFunction& u, const Grid& grid);
/// x,[y_base,]y,U over every node and level.
std::string cylinder_csv(const CylinderField& U);

/// Writes text to dir/name, creating dir. Throws IoError.
std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name,
                                 const std::string& text);

}  // namespace fracmix
