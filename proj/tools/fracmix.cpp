// fracmix command line: eigenpairs, both solution routes, and the studies.
//
// Exit codes: 0 when every check passes, 2 when a check fails, 1 on error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "fracmix/experiments.hpp"
#include "fracmix/spectral_op.hpp"

using namespace fracmix;

namespace {

struct Options {
    std::string config;
    std::string out = "results";
    std::string format = "csv";
    std::uint64_t seed = 0;
    bool seed_given = false;
};

struct Checks {
    bool ok = true;

    void require(bool pass, const std::string& what) {
        std::printf("  [%s] %s\n", pass ? "pass" : "FAIL", what.c_str());
        ok = ok && pass;
    }
    int exit_code() const { return ok ? 0 : 2; }
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

StudyConfig load(const Options& o) {
    if (o.config.empty()) throw Error(ErrorCode::ConfigError, "--config is required for this subcommand");
    StudyConfig cfg = parse_config(o.config);
    if (o.seed_given) cfg.seed = o.seed;
    return cfg;
}

void save(const Options& o, const std::string& stem, const std::string& csv, const nlohmann::json& json) {
    const auto fmt = format_from_string(o.format);
    const auto path = fmt == OutputFormat::Csv ? write_file(o.out, stem + ".csv", csv)
                                               : write_file(o.out, stem + ".json", json.dump(2) + "\n");
    std::printf("wrote %s\n", path.string().c_str());
}

int cmd_eig(const Options& o) {
    const StudyConfig cfg = load(o);
    const BoundaryPartition part = cfg.partition();
    const Grid grid = classify_boundary_nodes(discretize(cfg.domain, cfg.grid_n()), part);
    const StiffnessMass sm = assemble(grid, part);
    const int J = cfg.modes > 0 ? std::min(cfg.modes, sm.size()) : default_mode_count(sm);
    const EigenBasis basis = solve_eigen(sm, J);
    const double resid = eigen_residual(sm, basis);
    std::printf("eig: %d modes on %d free nodes, lambda_1 = %s, residual %s\n", basis.size(), sm.size(),
                num(basis.eigenvalues[0]).c_str(), num(resid).c_str());
    nlohmann::json payload = basis_json(basis);
    payload["residual"] = resid;
    save(o, "eig", basis_csv(basis), envelope(cfg, "eig", payload));
    if (format_from_string(o.format) == OutputFormat::Csv)
        for (int j = 0; j < basis.size(); ++j)
            write_file(o.out, "eigvec_" + std::to_string(j + 1) + ".csv", field_csv(basis.mode(j), grid));
    Checks c;
    c.require(resid <= 1e-8, "eigen residual " + num(resid) + " <= 1e-8");
    return c.exit_code();
}

int cmd_solve_spectral(const Options& o) {
    const StudyConfig cfg = load(o);
    const Problem pb = build_problem(cfg);
    const GridFunction u = solve_spectral(pb.f, *pb.basis, cfg.s);
    const double ratio = verify_linfty_bound(u, pb.f, *pb.grid, cfg.s, cfg.p);
    const double H = holder_seminorm(u, *pb.grid, cfg.gamma, cfg.seed);
    std::printf("solve-spectral: ||u||_inf = %s, L^inf ratio (p = %s) = %s, H(gamma = %s) = %s\n",
                num(u.cwiseAbs().maxCoeff()).c_str(), num(cfg.p).c_str(), num(ratio).c_str(), num(cfg.gamma).c_str(),
                num(H).c_str());
    RegularityReport rep;
    rep.gamma = cfg.gamma;
    rep.seminorm = H;
    rep.linfty_ratio = ratio;
    const double top = u.maxCoeff();
    for (int i = 0; i <= 4; ++i) rep.levelset_table.push_back(level_set_measure(u, *pb.grid, top * i / 4.0));
    nlohmann::json payload = field_json(u, *pb.grid);
    payload["regularity"] = to_json(rep);
    save(o, "solution", field_csv(u, *pb.grid), envelope(cfg, "solution", payload));
    return 0;
}

int cmd_solve_extension(const Options& o) {
    const StudyConfig cfg = load(o);
    const BoundaryPartition part = cfg.partition();
    const auto grid = std::make_shared<const Grid>(classify_boundary_nodes(discretize(cfg.domain, cfg.grid_n()), part));
    const StiffnessMass sm = assemble(*grid, part);
    // Only lambda_1 (and the mode named by f, if any) is needed here.
    const int wanted = cfg.f.rfind("mode:", 0) == 0 ? std::stoi(cfg.f.substr(5)) : 1;
    const EigenBasis basis = solve_eigen(sm, std::min(sm.size(), wanted), EigenMethod::Lanczos);
    const double Y = cfg.Y > 0.0 ? cfg.Y : default_height(basis.eigenvalues[0]);
    const auto cyl = build_cylinder(*grid, Y, cfg.levels(), cfg.q);
    const auto sys = std::make_shared<const WeightedSystem>(assemble_weighted(cyl, part, cfg.s));
    const CylinderField U = solve_extension(sys, evaluate_profile(cfg.f, *grid, &basis));
    const WeightedEnergy E = weighted_energy(U);
    std::printf("solve-extension: %d unknowns, Y = %s, CG %d iterations, residual %s, energy/kappa = %s\n",
                sys->unknowns(), num(Y).c_str(), U.diagnostics.iterations, num(U.diagnostics.relative_residual).c_str(),
                num(E.scaled).c_str());
    nlohmann::json payload = field_json(U.trace(), *grid);
    payload["Y"] = Y;
    payload["cg_iterations"] = U.diagnostics.iterations;
    payload["cg_residual"] = U.diagnostics.relative_residual;
    payload["energy_raw"] = E.raw;
    payload["energy_scaled"] = E.scaled;
    save(o, "trace", field_csv(U.trace(), *grid), envelope(cfg, "trace", payload));
    if (format_from_string(o.format) == OutputFormat::Csv) write_file(o.out, "cylinder.csv", cylinder_csv(U));
    Checks c;
    c.require(U.diagnostics.relative_residual <= 1e-10, "CG residual " + num(U.diagnostics.relative_residual) + " <= 1e-10");
    return c.exit_code();
}

int cmd_equivalence(const Options& o) {
    const StudyConfig cfg = load(o);
    const EquivalenceReport rep = run_equivalence(cfg);
    auto line = [](const char* tag, const EquivalencePass& p) {
        std::printf("%s n=%d M=%d Y=%s: trace gap %s, isometry gap %s, flux gap %s\n", tag, p.n, p.M,
                    num(p.Y).c_str(), num(p.trace_gap).c_str(), num(p.isometry_gap).c_str(), num(p.flux_gap).c_str());
    };
    line("equivalence", rep.base);
    if (rep.refined) line("refined    ", *rep.refined);
    std::string csv = "pass,n,M,Y,lambda1,trace_gap,isometry_gap,flux_gap\n";
    auto row = [&](const char* tag, const EquivalencePass& p) {
        csv += std::string(tag) + "," + std::to_string(p.n) + "," + std::to_string(p.M) + "," + num(p.Y) + "," +
               num(p.lambda1) + "," + num(p.trace_gap) + "," + num(p.isometry_gap) + "," + num(p.flux_gap) + "\n";
    };
    row("base", rep.base);
    if (rep.refined) row("refined", *rep.refined);
    save(o, "equivalence", csv, envelope(cfg, "equivalence", to_json(rep)));
    Checks c;
    c.require(rep.base.trace_gap <= 0.02, "trace gap " + num(rep.base.trace_gap) + " <= 0.02");
    c.require(rep.base.isometry_gap <= 0.02, "isometry gap " + num(rep.base.isometry_gap) + " <= 0.02");
    if (rep.refined)
        c.require(rep.refinement_ratio() <= 0.6, "refinement ratio " + num(rep.refinement_ratio()) + " <= 0.6");
    return c.exit_code();
}

int cmd_sweep(const Options& o) {
    const StudyConfig cfg = load(o);
    const SweepResult res = run_alpha_sweep(cfg);
    std::printf("%s", sweep_csv(res.rows).c_str());
    const auto path = emit_results(res, cfg, format_from_string(o.format), o.out);
    std::printf("wrote %s\n", path.string().c_str());
    const auto& d = res.diagnostics;
    std::printf("Spearman(alpha, H) = %s\n", num(d.spearman_H).c_str());
    Checks c;
    c.require(d.lambda_monotone, "lambda_1 non-decreasing in alpha");
    c.require(d.cd_ratio <= 0.5, "CD_upper(alpha_min) / CD_upper(alpha_max) = " + num(d.cd_ratio) + " <= 0.5");
    c.require(d.holder_endpoints, "H(alpha_min) >= H(alpha_max)");
    return c.exit_code();
}

int cmd_interface(const Options& o) {
    const StudyConfig cfg = load(o);
    const InterfaceProfile r = run_interface_profile(cfg);
    std::string csv = "rho,omega\n";
    for (std::size_t i = 0; i < r.profile.radii.size(); ++i) {
        csv += num(r.profile.radii[i]) + "," + num(r.profile.omega[i]) + "\n";
        std::printf("rho %-10s omega %s\n", num(r.profile.radii[i]).c_str(), num(r.profile.omega[i]).c_str());
    }
    std::printf("tau = %s, eta_bar = %s, fit points %d\n", r.fit.degenerate ? "undefined" : num(r.fit.tau).c_str(),
                num(r.fit.eta_bar).c_str(), r.fit.points);
    save(o, "interface_profile", csv, envelope(cfg, "interface_profile", to_json(r)));
    Checks c;
    c.require(!r.fit.degenerate, "profile is not degenerate");
    c.require(!r.fit.degenerate && r.fit.tau > 0.0 && r.fit.tau <= 0.6, "tau in (0, 0.6]");
    c.require(r.fit.eta_bar < 1.0, "4-adic ratios <= eta_bar = " + num(r.fit.eta_bar) + " < 1");
    return c.exit_code();
}

int cmd_lemma(const Options& o) {
    const std::uint64_t seed = o.seed_given ? o.seed : holder_seed;
    const LemmaCheck lc = run_lemma_check(seed);
    std::printf("lemma-check: %zu + %zu tuples, worst relative gap %s\n", lc.b1.size(), lc.c7.size(),
                num(lc.worst_gap()).c_str());
    std::string csv = "lemma,index,closed_form,recursion,rel_gap\n";
    for (std::size_t i = 0; i < lc.b1.size(); ++i)
        csv += "B1," + std::to_string(i) + "," + num(lc.b1[i].closed_form) + "," + num(lc.b1[i].recursion) + "," +
               num(lc.b1[i].rel_gap) + "\n";
    for (std::size_t i = 0; i < lc.c7.size(); ++i)
        csv += "C7," + std::to_string(i) + "," + num(lc.c7[i].closed_form) + "," + num(lc.c7[i].recursion) + "," +
               num(lc.c7[i].rel_gap) + "\n";
    nlohmann::json j = to_json(lc);
    j["version"] = version();
    j["seed"] = seed;
    save(o, "lemma_check", csv, j);
    Checks c;
    c.require(lc.worst_gap() <= 1e-10, "closed forms match the recursion to 1e-10");
    return c.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixed-boundary spectral fractional Laplacian toolkit"};
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Study config (key = value)");
        sub->add_option("--out", o.out, "Output directory")->capture_default_str();
        sub->add_option("--format", o.format, "csv or json")
            ->check(CLI::IsMember({"csv", "json"}))
            ->capture_default_str();
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& v) { o.seed = v; o.seed_given = true; }, "Override the RNG seed");
    };

    struct Entry {
        const char* name;
        const char* help;
        int (*run)(const Options&);
    };
    const Entry entries[] = {
        {"eig", "Mixed-BC eigenpairs", cmd_eig},
        {"solve-spectral", "Spectral solution of (-Delta)^s u = f", cmd_solve_spectral},
        {"solve-extension", "Extension solution, trace at y = 0", cmd_solve_extension},
        {"equivalence", "Spectral vs extension route gaps", cmd_equivalence},
        {"sweep-alpha", "Moving-boundary sweep over |Sigma_D| = alpha", cmd_sweep},
        {"interface-profile", "Oscillation decay at an interface point", cmd_interface},
        {"lemma-check", "Iteration lemma thresholds vs recursion", cmd_lemma},
    };
    int (*chosen)(const Options&) = nullptr;
    for (const auto& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.help);
        common(sub);
        sub->callback([&chosen, run = e.run] { chosen = run; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    try {
        return chosen(o);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
