#include "fracmix/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "fracmix/spectral_op.hpp"

#ifndef FRACMIX_VERSION
#define FRACMIX_VERSION "unknown"
#endif

namespace fracmix {

const char* version() { return FRACMIX_VERSION; }

namespace {

constexpr double pi = 3.141592653589793;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    return out;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

double plain_number(const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size())
        throw Error(ErrorCode::ConfigError, "not a number: '" + text + "'");
    return v;
}

// "2.5", "pi", "-pi/2", "3*pi/4", "0.5pi"
double parse_number(const std::string& raw) {
    const std::string text = lower(trim(raw));
    const auto at = text.find("pi");
    if (at == std::string::npos) return plain_number(text);
    std::string coef = trim(text.substr(0, at));
    if (!coef.empty() && coef.back() == '*') coef = trim(coef.substr(0, coef.size() - 1));
    double c = 1.0;
    if (coef == "-")
        c = -1.0;
    else if (!coef.empty() && coef != "+")
        c = plain_number(coef);
    const std::string rest = trim(text.substr(at + 2));
    double den = 1.0;
    if (!rest.empty()) {
        if (rest[0] != '/') throw Error(ErrorCode::ConfigError, "not a number: '" + raw + "'");
        den = plain_number(trim(rest.substr(1)));
    }
    return c * pi / den;
}

int parse_int(const std::string& text) {
    const double v = plain_number(trim(text));
    if (v != std::floor(v) || std::abs(v) > 2e9)
        throw Error(ErrorCode::ConfigError, "not an integer: '" + text + "'");
    return static_cast<int>(v);
}

bool parse_bool(const std::string& text) {
    const std::string t = lower(trim(text));
    if (t == "true" || t == "yes" || t == "1" || t == "on") return true;
    if (t == "false" || t == "no" || t == "0" || t == "off") return false;
    throw Error(ErrorCode::ConfigError, "not a boolean: '" + text + "'");
}

std::uint64_t parse_seed(const std::string& text) {
    const std::string t = trim(text);
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(t, &used, 0);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != t.size()) throw Error(ErrorCode::ConfigError, "not a seed: '" + text + "'");
    return v;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

Point2 edge_point(const DomainSpec& d, Edge e, double t) {
    switch (e) {
        case Edge::Bottom: return {t, 0.0};
        case Edge::Top: return {t, d.ly};
        case Edge::Left: return {0.0, t};
        case Edge::Right: return {d.lx, t};
    }
    return {};
}

int nearest_node(const Grid& g, const Point2& p) {
    int best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (int k = 0; k < g.node_count(); ++k) {
        const double dx = g.x(k) - p.x;
        const double dy = g.y(k) - p.y;
        const double d = dx * dx + dy * dy;
        if (d < dist) {
            dist = d;
            best = k;
        }
    }
    return best;
}

std::vector<double> profile_radii(const StudyConfig& cfg, double h) {
    const double R = cfg.radius > 0.0 ? cfg.radius : 64.0 * h * (1.0 + 1e-9);
    std::vector<double> radii;
    for (int i = 0; i <= 4; ++i) radii.push_back(R * std::pow(4.0, -i));
    return radii;
}

bool known_profile(const std::string& d) {
    return d == "constant" || d.rfind("constant:", 0) == 0 || d.rfind("mode:", 0) == 0 || d == "bump" ||
           d == "step" || d.rfind("csv:", 0) == 0;
}

int mode_index(const std::string& d) {
    return d.rfind("mode:", 0) == 0 ? parse_int(d.substr(5)) : 0;
}

double relative_sup_gap(const GridFunction& a, const GridFunction& ref) {
    const double scale = ref.cwiseAbs().maxCoeff();
    const double gap = (a - ref).cwiseAbs().maxCoeff();
    if (scale == 0.0) return gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return gap / scale;
}

}  // namespace

// ---- config -------------------------------------------------------------

int StudyConfig::grid_n() const {
    if (n > 0) return n;
    return domain.dim() == 1 ? 257 : 33;
}

int StudyConfig::levels() const {
    if (M > 0) return M;
    return domain.dim() == 1 ? 128 : 32;
}

std::string StudyConfig::dirichlet_spec() const {
    if (!dirichlet.empty()) return dirichlet;
    return domain.dim() == 1 ? "left" : "bottom:0:" + fmt(0.5 * domain.lx);
}

double StudyConfig::resolved_epsilon() const {
    return epsilon > 0.0 ? epsilon : domain.boundary_measure() / 20.0;
}

BoundaryPartition StudyConfig::partition() const {
    std::vector<BoundaryArc> arcs;
    if (domain.dim() == 1) {
        for (const auto& tok : split(dirichlet_spec(), ',')) {
            const std::string t = lower(tok);
            if (t == "left")
                arcs.push_back({Edge::Left, 0.0, 0.0});
            else if (t == "right")
                arcs.push_back({Edge::Right, 0.0, 0.0});
            else
                throw Error(ErrorCode::ConfigError, "1D dirichlet entries are left or right, got '" + tok + "'");
        }
    } else {
        for (const auto& tok : split(dirichlet_spec(), ';')) {
            if (tok.empty()) continue;
            const auto parts = split(tok, ':');
            if (parts.size() != 3)
                throw Error(ErrorCode::ConfigError, "dirichlet arc must read edge:t0:t1, got '" + tok + "'");
            arcs.push_back({edge_from_string(lower(parts[0])), parse_number(parts[1]), parse_number(parts[2])});
        }
    }
    return make_partition(domain, arcs);
}

MovingFamily StudyConfig::family() const {
    MovingFamily fam;
    fam.domain = domain;
    fam.anchor_edge = anchor;
    fam.anchor_t = anchor_t;
    fam.direction = direction;
    fam.epsilon = resolved_epsilon();
    return fam;
}

std::vector<double> StudyConfig::sweep_alphas() const {
    if (!alphas.empty()) {
        auto out = alphas;
        std::sort(out.begin(), out.end());
        return out;
    }
    const double lo = resolved_epsilon();
    const double hi = domain.boundary_measure();
    std::vector<double> out;
    for (int i = 0; i < sweep_count; ++i) {
        const double t = sweep_count == 1 ? 1.0 : static_cast<double>(i) / (sweep_count - 1);
        out.push_back(lo * std::pow(hi / lo, t));
    }
    out.back() = hi;
    return out;
}

void validate(const StudyConfig& cfg) {
    make_domain(cfg.domain);
    const FracParams fp = FracParams::make(cfg.s, cfg.domain.dim());
    (void)fp;
    if (cfg.f.empty()) throw Error(ErrorCode::MissingField, "missing required key 'f'");
    if (!known_profile(cfg.f))
        throw Error(ErrorCode::ConfigError, "unknown f profile '" + cfg.f + "'");
    if (mode_index(cfg.f) < 0 || (cfg.f.rfind("mode:", 0) == 0 && mode_index(cfg.f) < 1))
        throw Error(ErrorCode::ConfigError, "mode index is 1-based");
    const int N = cfg.domain.dim();
    if (!(cfg.p > N / (2.0 * cfg.s))) {
        std::ostringstream os;
        os << "p = " << cfg.p << " must exceed N/(2s) = " << N / (2.0 * cfg.s);
        throw Error(ErrorCode::ExponentViolation, os.str());
    }
    if (cfg.n != 0 && cfg.n < 3) throw Error(ErrorCode::ConfigError, "n must be at least 3");
    if (cfg.M != 0 && cfg.M < 8) throw Error(ErrorCode::ConfigError, "M must be at least 8");
    if (cfg.modes < 0) throw Error(ErrorCode::ConfigError, "modes must be non-negative");
    if (!(cfg.q >= 1.0)) throw Error(ErrorCode::ConfigError, "q must be at least 1");
    if (!(cfg.Y >= 0.0)) throw Error(ErrorCode::ConfigError, "Y must be non-negative");
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw Error(ErrorCode::ConfigError, "gamma must lie in (0, 1)");
    if (!(cfg.radius >= 0.0)) throw Error(ErrorCode::ConfigError, "radius must be non-negative");
    if (!(cfg.epsilon >= 0.0)) throw Error(ErrorCode::ConfigError, "epsilon must be non-negative");
    if (cfg.sweep_count < 2) throw Error(ErrorCode::ConfigError, "sweep.count must be at least 2");
    if (cfg.threads < 0) throw Error(ErrorCode::ConfigError, "threads must be non-negative");
    for (double a : cfg.alphas)
        if (!(a > 0.0)) throw Error(ErrorCode::ConfigError, "alphas must be positive");
    cfg.partition();
}

StudyConfig parse_config_text(const std::string& text) {
    StudyConfig cfg;
    std::map<std::string, int> seen;
    std::string domain_kind = "interval";
    std::map<std::string, double> extents;
    std::istringstream is(text);
    std::string raw;
    int lineno = 0;
    auto fail = [&](ErrorCode code, const std::string& msg) {
        throw Error(code, "line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(is, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorCode::ConfigError, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(ErrorCode::ConfigError, "empty key");
        if (seen.count(key))
            fail(ErrorCode::ConfigError, "duplicate key '" + key + "' (first on line " + std::to_string(seen[key]) + ")");
        seen[key] = lineno;
        try {
            if (key == "domain") {
                domain_kind = lower(value);
                if (domain_kind != "interval" && domain_kind != "rectangle")
                    throw Error(ErrorCode::ConfigError, "domain is interval or rectangle");
            } else if (key == "a" || key == "b" || key == "lx" || key == "ly") {
                extents[key] = parse_number(value);
            } else if (key == "dirichlet") {
                cfg.dirichlet = value;
            } else if (key == "family.anchor") {
                cfg.anchor = edge_from_string(lower(value));
            } else if (key == "family.t") {
                cfg.anchor_t = parse_number(value);
            } else if (key == "family.direction") {
                const std::string d = lower(value);
                if (d == "clockwise")
                    cfg.direction = Direction::Clockwise;
                else if (d == "counterclockwise")
                    cfg.direction = Direction::CounterClockwise;
                else
                    throw Error(ErrorCode::ConfigError, "direction is clockwise or counterclockwise");
            } else if (key == "epsilon") {
                cfg.epsilon = parse_number(value);
            } else if (key == "alphas") {
                cfg.alphas.clear();
                for (const auto& tok : split(value, ','))
                    if (!tok.empty()) cfg.alphas.push_back(parse_number(tok));
            } else if (key == "sweep.count") {
                cfg.sweep_count = parse_int(value);
            } else if (key == "s") {
                cfg.s = parse_number(value);
                FracParams::make(cfg.s, 1);
            } else if (key == "f") {
                cfg.f = value;
                if (!known_profile(cfg.f)) throw Error(ErrorCode::ConfigError, "unknown f profile '" + value + "'");
                if (cfg.f.rfind("mode:", 0) == 0 && mode_index(cfg.f) < 1)
                    throw Error(ErrorCode::ConfigError, "mode index is 1-based");
            } else if (key == "n") {
                cfg.n = parse_int(value);
            } else if (key == "modes") {
                cfg.modes = parse_int(value);
            } else if (key == "Y") {
                cfg.Y = parse_number(value);
            } else if (key == "M") {
                cfg.M = parse_int(value);
            } else if (key == "q") {
                cfg.q = parse_number(value);
            } else if (key == "p") {
                cfg.p = lower(value) == "inf" ? std::numeric_limits<double>::infinity() : parse_number(value);
            } else if (key == "gamma") {
                cfg.gamma = parse_number(value);
            } else if (key == "radius") {
                cfg.radius = parse_number(value);
            } else if (key == "refine") {
                cfg.refine = parse_bool(value);
            } else if (key == "threads") {
                cfg.threads = parse_int(value);
            } else if (key == "seed") {
                cfg.seed = parse_seed(value);
            } else {
                throw Error(ErrorCode::ConfigError, "unknown key '" + key + "'");
            }
        } catch (const Error& e) {
            fail(e.code(), e.detail());
        }
    }

    auto get = [&](const char* k, double def) { return extents.count(k) ? extents[k] : def; };
    if (domain_kind == "interval") {
        for (const char* k : {"lx", "ly"})
            if (extents.count(k)) {
                lineno = seen[k];
                fail(ErrorCode::ConfigError, std::string(k) + " applies to rectangles only");
            }
        cfg.domain = DomainSpec::interval(get("a", 0.0), get("b", pi));
    } else {
        for (const char* k : {"a", "b"})
            if (extents.count(k)) {
                lineno = seen[k];
                fail(ErrorCode::ConfigError, std::string(k) + " applies to intervals only");
            }
        cfg.domain = DomainSpec::rectangle(get("lx", pi), get("ly", pi));
    }

    auto blame = [&](std::initializer_list<const char*> keys, auto&& check) {
        try {
            check();
        } catch (const Error& e) {
            for (const char* k : keys)
                if (seen.count(k)) {
                    lineno = seen[k];
                    fail(e.code(), e.detail());
                }
            throw;
        }
    };
    blame({"lx", "ly", "a", "b", "domain"}, [&] { make_domain(cfg.domain); });
    if (cfg.f.empty()) throw Error(ErrorCode::MissingField, "missing required key 'f'");
    blame({"p", "s"}, [&] {
        const int N = cfg.domain.dim();
        if (!(cfg.p > N / (2.0 * cfg.s))) {
            std::ostringstream os;
            os << "p = " << cfg.p << " must exceed N/(2s) = " << N / (2.0 * cfg.s);
            throw Error(ErrorCode::ExponentViolation, os.str());
        }
    });
    blame({"dirichlet", "domain"}, [&] { cfg.partition(); });
    validate(cfg);
    return cfg;
}

StudyConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read config '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    try {
        return parse_config_text(os.str());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.detail());
    }
}

nlohmann::json to_json(const StudyConfig& cfg) {
    nlohmann::json j;
    j["domain"] = cfg.domain.dim() == 1 ? "interval" : "rectangle";
    if (cfg.domain.dim() == 1) {
        j["a"] = cfg.domain.a;
        j["b"] = cfg.domain.b;
    } else {
        j["lx"] = cfg.domain.lx;
        j["ly"] = cfg.domain.ly;
    }
    j["dirichlet"] = cfg.dirichlet_spec();
    j["family.anchor"] = to_string(cfg.anchor);
    j["family.t"] = cfg.anchor_t;
    j["family.direction"] = cfg.direction == Direction::Clockwise ? "clockwise" : "counterclockwise";
    j["epsilon"] = cfg.resolved_epsilon();
    j["alphas"] = cfg.alphas;
    j["sweep.count"] = cfg.sweep_count;
    j["s"] = cfg.s;
    j["f"] = cfg.f;
    j["n"] = cfg.grid_n();
    j["modes"] = cfg.modes;
    j["Y"] = cfg.Y;
    j["M"] = cfg.levels();
    j["q"] = cfg.q;
    j["p"] = std::isinf(cfg.p) ? nlohmann::json("inf") : nlohmann::json(cfg.p);
    j["gamma"] = cfg.gamma;
    j["radius"] = cfg.radius;
    j["refine"] = cfg.refine;
    j["threads"] = cfg.threads;
    j["seed"] = cfg.seed;
    return j;
}

std::string to_config_text(const StudyConfig& cfg) {
    std::ostringstream os;
    os << "domain = " << (cfg.domain.dim() == 1 ? "interval" : "rectangle") << "\n";
    if (cfg.domain.dim() == 1)
        os << "a = " << fmt(cfg.domain.a) << "\nb = " << fmt(cfg.domain.b) << "\n";
    else
        os << "lx = " << fmt(cfg.domain.lx) << "\nly = " << fmt(cfg.domain.ly) << "\n";
    os << "dirichlet = " << cfg.dirichlet_spec() << "\n";
    os << "family.anchor = " << to_string(cfg.anchor) << "\n";
    os << "family.t = " << fmt(cfg.anchor_t) << "\n";
    os << "family.direction = " << (cfg.direction == Direction::Clockwise ? "clockwise" : "counterclockwise") << "\n";
    os << "epsilon = " << fmt(cfg.resolved_epsilon()) << "\n";
    os << "alphas = ";
    for (std::size_t i = 0; i < cfg.alphas.size(); ++i) os << (i ? "," : "") << fmt(cfg.alphas[i]);
    os << "\n";
    os << "sweep.count = " << cfg.sweep_count << "\n";
    os << "s = " << fmt(cfg.s) << "\n";
    os << "f = " << cfg.f << "\n";
    os << "n = " << cfg.grid_n() << "\n";
    os << "modes = " << cfg.modes << "\n";
    os << "Y = " << fmt(cfg.Y) << "\n";
    os << "M = " << cfg.levels() << "\n";
    os << "q = " << fmt(cfg.q) << "\n";
    os << "p = " << (std::isinf(cfg.p) ? std::string("inf") : fmt(cfg.p)) << "\n";
    os << "gamma = " << fmt(cfg.gamma) << "\n";
    os << "radius = " << fmt(cfg.radius) << "\n";
    os << "refine = " << (cfg.refine ? "true" : "false") << "\n";
    os << "threads = " << cfg.threads << "\n";
    os << "seed = " << cfg.seed << "\n";
    return os.str();
}

// ---- problems -----------------------------------------------------------

GridFunction evaluate_profile(const std::string& d, const Grid& grid, const EigenBasis* basis) {
    const DomainSpec& dom = grid.domain;
    const bool one = dom.dim() == 1;
    const double cx = one ? 0.5 * (dom.a + dom.b) : 0.5 * dom.lx;
    const double cy = one ? 0.0 : 0.5 * dom.ly;
    if (d == "constant") return GridFunction::Ones(grid.node_count());
    if (d.rfind("constant:", 0) == 0) return GridFunction::Constant(grid.node_count(), parse_number(d.substr(9)));
    if (d.rfind("mode:", 0) == 0) {
        const int k = mode_index(d);
        if (!basis) throw Error(ErrorCode::BasisMismatch, "f = " + d + " needs an eigenbasis");
        if (k < 1 || k > basis->size())
            throw Error(ErrorCode::BasisMismatch, "f = " + d + " is outside the " + std::to_string(basis->size()) + "-mode basis");
        return basis->mode(k - 1);
    }
    if (d == "bump") {
        const double rho = 0.25 * (one ? dom.b - dom.a : std::min(dom.lx, dom.ly));
        return grid.sample([&](double x, double y) {
            const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (rho * rho);
            return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
        });
    }
    if (d == "step") return grid.sample([&](double x, double) { return x <= cx ? 1.0 : 0.0; });
    if (d.rfind("csv:", 0) == 0) {
        const std::string path = d.substr(4);
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::IoError, "cannot read f values from '" + path + "'");
        std::vector<double> vals;
        std::string tok;
        while (in >> tok)
            for (const auto& piece : split(tok, ','))
                if (!piece.empty()) vals.push_back(plain_number(piece));
        if (static_cast<int>(vals.size()) != grid.node_count())
            throw Error(ErrorCode::ConfigError, "'" + path + "' holds " + std::to_string(vals.size()) +
                                                    " values for " + std::to_string(grid.node_count()) + " nodes");
        return Eigen::Map<const GridFunction>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    }
    throw Error(ErrorCode::ConfigError, "unknown f profile '" + d + "'");
}

Problem build_problem(const StudyConfig& cfg, const BoundaryPartition& part, int modes) {
    Problem pb;
    pb.partition = part;
    pb.grid = std::make_shared<const Grid>(classify_boundary_nodes(discretize(cfg.domain, cfg.grid_n()), part));
    pb.sm = assemble(*pb.grid, part);
    const int J = modes > 0 ? std::min(modes, pb.sm.size()) : pb.sm.size();
    pb.basis = std::make_shared<const EigenBasis>(solve_eigen(pb.sm, J));
    pb.f = evaluate_profile(cfg.f, *pb.grid, pb.basis.get());
    return pb;
}

Problem build_problem(const StudyConfig& cfg) { return build_problem(cfg, cfg.partition(), cfg.modes); }

// ---- equivalence --------------------------------------------------------

namespace {

EquivalencePass equivalence_pass(const StudyConfig& cfg) {
    const Problem pb = build_problem(cfg);
    EquivalencePass out;
    out.n = cfg.grid_n();
    out.M = cfg.levels();
    out.lambda1 = pb.basis->eigenvalues[0];
    out.Y = cfg.Y > 0.0 ? cfg.Y : default_height(out.lambda1);

    const GridFunction u = solve_spectral(pb.f, *pb.basis, cfg.s);
    const auto cyl = build_cylinder(*pb.grid, out.Y, out.M, cfg.q);
    const auto sys = std::make_shared<const WeightedSystem>(assemble_weighted(cyl, pb.partition, cfg.s));

    const CylinderField U = solve_extension(sys, pb.f);
    out.cg_iterations = U.diagnostics.iterations;
    out.cg_residual = U.diagnostics.relative_residual;
    out.trace_gap = relative_sup_gap(U.trace(), u);

    const CylinderField E = extend(sys, u);
    const SpectralFunction su = project(u, pb.basis);
    const double hs2 = std::pow(hs_norm(su, cfg.s), 2);
    const double energy = weighted_energy(E).scaled;
    out.isometry_gap = hs2 > 0.0 ? std::abs(energy - hs2) / hs2 : std::abs(energy);
    out.flux_gap = relative_sup_gap(fractional_flux(E), apply_frac_laplacian(su, cfg.s).synthesize());
    return out;
}

}  // namespace

double EquivalenceReport::refinement_ratio() const {
    if (!refined) return std::numeric_limits<double>::quiet_NaN();
    if (base.trace_gap == 0.0) return refined->trace_gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return refined->trace_gap / base.trace_gap;
}

EquivalenceReport run_equivalence(const StudyConfig& cfg) {
    validate(cfg);
    EquivalenceReport rep;
    rep.base = equivalence_pass(cfg);
    if (cfg.refine) {
        StudyConfig fine = cfg;
        fine.n = 2 * cfg.grid_n() - 1;
        fine.M = 2 * cfg.levels();
        fine.Y = 2.0 * rep.base.Y;
        rep.refined = equivalence_pass(fine);
    }
    return rep;
}

namespace {

nlohmann::json pass_json(const EquivalencePass& p) {
    return {{"n", p.n},
            {"M", p.M},
            {"Y", p.Y},
            {"lambda1", p.lambda1},
            {"trace_gap", p.trace_gap},
            {"isometry_gap", p.isometry_gap},
            {"flux_gap", p.flux_gap},
            {"cg_iterations", p.cg_iterations},
            {"cg_residual", p.cg_residual}};
}

}  // namespace

nlohmann::json to_json(const EquivalenceReport& report) {
    nlohmann::json j = {{"base", pass_json(report.base)}};
    if (report.refined) {
        j["refined"] = pass_json(*report.refined);
        j["refinement_ratio"] = report.refinement_ratio();
    }
    return j;
}

// ---- alpha sweep --------------------------------------------------------

SweepRow sweep_row(const StudyConfig& cfg, double alpha) {
    const MovingFamily fam = cfg.family();
    const Problem pb = build_problem(cfg, partition_at(fam, alpha), 0);
    const int N = cfg.domain.dim();
    SweepRow row;
    row.alpha = alpha;
    row.lambda1 = pb.basis->eigenvalues[0];
    row.cd_upper = std::pow(cfg.domain.volume(), 2.0 * cfg.s / N) * std::pow(row.lambda1, cfg.s);
    const GridFunction u = solve_spectral(pb.f, *pb.basis, cfg.s);
    row.linf = u.cwiseAbs().maxCoeff();
    row.holder_H = holder_seminorm(u, *pb.grid, cfg.gamma, cfg.seed);

    const Point2 c = pb.partition.interface.empty() ? edge_point(cfg.domain, fam.anchor_edge, fam.anchor_t)
                                                    : pb.partition.interface.front();
    const int node = nearest_node(*pb.grid, c);
    const CylinderPoint Z{pb.grid->x(node), pb.grid->y(node), 0.0};
    const HolderFit fit = fit_holder_exponent(oscillation_profile(u, *pb.grid, Z, profile_radii(cfg, pb.grid->h())));
    row.tau_fit = fit.degenerate ? std::numeric_limits<double>::quiet_NaN() : fit.tau;
    return row;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) return 0.0;
    auto ranks = [](const std::vector<double>& v) {
        std::vector<int> idx(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) idx[i] = static_cast<int>(i);
        std::sort(idx.begin(), idx.end(), [&](int x, int y) { return v[x] < v[y]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * (i + j);
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i] / n;
        mb += rb[i] / n;
    }
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return (saa > 0 && sbb > 0) ? sab / std::sqrt(saa * sbb) : 0.0;
}

SweepDiagnostics diagnose(const std::vector<SweepRow>& rows) {
    SweepDiagnostics d;
    if (rows.empty()) return d;
    d.lambda_monotone = true;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].lambda1 < rows[i - 1].lambda1 * (1.0 - 1e-12)) d.lambda_monotone = false;
    d.cd_ratio = rows.front().cd_upper / rows.back().cd_upper;
    std::vector<double> a, h;
    for (const auto& r : rows) {
        a.push_back(r.alpha);
        h.push_back(r.holder_H);
    }
    d.spearman_H = spearman(a, h);
    d.holder_endpoints = rows.front().holder_H >= rows.back().holder_H;
    return d;
}

SweepResult run_alpha_sweep(const StudyConfig& cfg) {
    validate(cfg);
    if (cfg.domain.dim() != 2) throw Error(ErrorCode::ConfigError, "the alpha sweep needs a rectangle");
    const std::vector<double> alphas = cfg.sweep_alphas();
    if (alphas.size() < 5) throw Error(ErrorCode::ConfigError, "the alpha sweep needs at least 5 alpha values");
    for (std::size_t i = 1; i < alphas.size(); ++i)
        if (!(alphas[i] > alphas[i - 1])) throw Error(ErrorCode::ConfigError, "alpha values must be distinct");

    SweepResult res;
    res.rows.resize(alphas.size());
    const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const int workers = std::min<int>(cfg.threads > 0 ? cfg.threads : hw, static_cast<int>(alphas.size()));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;
    auto work = [&] {
        for (std::size_t i = next++; i < alphas.size(); i = next++) {
            try {
                res.rows[i] = sweep_row(cfg, alphas[i]);
            } catch (...) {
                std::lock_guard<std::mutex> g(failure_lock);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    res.diagnostics = diagnose(res.rows);
    return res;
}

// ---- interface profile --------------------------------------------------

InterfaceProfile run_interface_profile(const StudyConfig& cfg) {
    validate(cfg);
    if (cfg.domain.dim() != 2) throw Error(ErrorCode::ConfigError, "the interface profile needs a rectangle");
    const BoundaryPartition part = cfg.partition();
    if (part.interface.empty()) throw Error(ErrorCode::ConfigError, "partition has no interface point inside an edge");
    const auto grid = std::make_shared<const Grid>(classify_boundary_nodes(discretize(cfg.domain, cfg.grid_n()), part));
    const StiffnessMass sm = assemble(*grid, part);
    const int J = std::max(1, mode_index(cfg.f));
    const EigenBasis basis = solve_eigen(sm, J, EigenMethod::Lanczos);

    InterfaceProfile out;
    out.lambda1 = basis.eigenvalues[0];
    out.Y = cfg.Y > 0.0 ? cfg.Y : default_height(out.lambda1);
    const auto cyl = build_cylinder(*grid, out.Y, cfg.levels(), cfg.q);
    const auto sys = std::make_shared<const WeightedSystem>(assemble_weighted(cyl, part, cfg.s));
    const CylinderField U = solve_extension(sys, evaluate_profile(cfg.f, *grid, &basis));
    out.solver = U.diagnostics;

    const int node = nearest_node(*grid, part.interface.front());
    const CylinderPoint Z{grid->x(node), grid->y(node), 0.0};
    out.profile = oscillation_profile(U, Z, profile_radii(cfg, grid->h()));
    out.fit = fit_holder_exponent(out.profile);
    return out;
}

nlohmann::json to_json(const InterfaceProfile& r) {
    return {{"center", {r.profile.center.x, r.profile.center.y, r.profile.center.t}},
            {"radii", r.profile.radii},
            {"omega", r.profile.omega},
            {"degenerate", r.fit.degenerate},
            {"tau", r.fit.degenerate ? nlohmann::json(nullptr) : nlohmann::json(r.fit.tau)},
            {"r_squared", r.fit.r_squared},
            {"ratios", r.fit.ratios},
            {"eta_bar", r.fit.eta_bar},
            {"fit_points", r.fit.points},
            {"lambda1", r.lambda1},
            {"Y", r.Y},
            {"cg_iterations", r.solver.iterations},
            {"cg_residual", r.solver.relative_residual}};
}

// ---- lemma check --------------------------------------------------------

namespace {

constexpr int recursion_steps = 200;

// True when log phi(k_n) increases somewhere along the first steps.
template <class Step>
bool recursion_grows(double L0, Step step) {
    double L = L0;
    for (int n = 0; n < recursion_steps; ++n) {
        const double next = step(n, L);
        if (next > L) return true;
        if (!std::isfinite(next)) return false;
        L = next;
    }
    return false;
}

template <class Grows>
double bisect_threshold(Grows grows) {
    double lo = -60.0;
    double hi = 60.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (grows(std::exp(mid)) ? lo : hi) = mid;
    }
    return std::exp(hi);
}

}  // namespace

double LemmaCheck::worst_gap() const {
    double w = 0.0;
    for (const auto& c : b1) w = std::max(w, c.rel_gap);
    for (const auto& c : c7) w = std::max(w, c.rel_gap);
    return w;
}

LemmaCheck run_lemma_check(std::uint64_t seed, int count) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> C0(0.5, 4.0), expo(0.5, 3.0), power(1.5, 3.0), phi(0.1, 10.0),
        r0(0.5, 2.0), ell(0.25, 0.75);
    LemmaCheck out;
    for (int i = 0; i < count; ++i) {
        LevelDecayParams p;
        p.C0 = C0(rng);
        p.a = expo(rng);
        p.b = power(rng);
        p.phi0 = phi(rng);
        LemmaCase c;
        c.params = {p.C0, p.a, p.b, p.phi0};
        c.closed_form = lemma_B1_threshold(p);
        c.recursion = bisect_threshold([&](double d) {
            return recursion_grows(std::log(p.phi0), [&](int n, double L) {
                return std::log(p.C0) - p.a * std::log(d * std::ldexp(1.0, -(n + 1))) + p.b * L;
            });
        });
        c.rel_gap = std::abs(c.closed_form - c.recursion) / c.recursion;
        out.b1.push_back(c);
    }
    for (int i = 0; i < count; ++i) {
        LevelRadiusDecayParams p;
        p.C0 = C0(rng);
        p.alpha = expo(rng);
        p.gamma = expo(rng);
        p.mu = power(rng);
        p.phi0 = phi(rng);
        p.r0 = r0(rng);
        p.ell = ell(rng);
        LemmaCase c;
        c.params = {p.C0, p.alpha, p.gamma, p.mu, p.phi0, p.r0, p.ell};
        c.closed_form = lemma_C7_threshold(p).d;
        c.recursion = bisect_threshold([&](double d) {
            return recursion_grows(std::log(p.phi0), [&](int n, double L) {
                const double shrink = p.ell * std::ldexp(1.0, -(n + 1));
                return std::log(p.C0) - p.alpha * std::log(d * shrink) - p.gamma * std::log(p.r0 * shrink) + p.mu * L;
            });
        });
        c.rel_gap = std::abs(c.closed_form - c.recursion) / c.recursion;
        out.c7.push_back(c);
    }
    return out;
}

nlohmann::json to_json(const LemmaCheck& check) {
    auto cases = [](const std::vector<LemmaCase>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& c : v)
            a.push_back({{"params", c.params}, {"closed_form", c.closed_form}, {"recursion", c.recursion}, {"rel_gap", c.rel_gap}});
        return a;
    };
    return {{"lemma_B1", cases(check.b1)}, {"lemma_C7", cases(check.c7)}, {"worst_gap", check.worst_gap()}};
}

// ---- output -------------------------------------------------------------

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "alpha,lambda1,cd_upper,linf,holder_H,tau_fit\n";
    for (const auto& r : rows)
        os << fmt_short(r.alpha) << ',' << fmt_short(r.lambda1) << ',' << fmt_short(r.cd_upper) << ','
           << fmt_short(r.linf) << ',' << fmt_short(r.holder_H) << ',' << fmt_short(r.tau_fit) << '\n';
    return os.str();
}

nlohmann::json sweep_json(const SweepResult& result, const StudyConfig& cfg) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : result.rows)
        rows.push_back({{"alpha", r.alpha},
                        {"lambda1", r.lambda1},
                        {"cd_upper", r.cd_upper},
                        {"linf", r.linf},
                        {"holder_H", r.holder_H},
                        {"tau_fit", std::isnan(r.tau_fit) ? nlohmann::json(nullptr) : nlohmann::json(r.tau_fit)}});
    const auto& d = result.diagnostics;
    nlohmann::json j = envelope(cfg, "rows", rows);
    j["diagnostics"] = {{"lambda_monotone", d.lambda_monotone},
                        {"cd_ratio", d.cd_ratio},
                        {"spearman_H", d.spearman_H},
                        {"holder_endpoints", d.holder_endpoints}};
    return j;
}

OutputFormat format_from_string(const std::string& name) {
    const std::string n = lower(name);
    if (n == "csv") return OutputFormat::Csv;
    if (n == "json") return OutputFormat::Json;
    throw Error(ErrorCode::ConfigError, "format is csv or json, got '" + name + "'");
}

nlohmann::json envelope(const StudyConfig& cfg, const std::string& key, nlohmann::json payload) {
    nlohmann::json j;
    j["version"] = version();
    j["config"] = to_json(cfg);
    j[key] = std::move(payload);
    return j;
}

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create '" + dir.string() + "': " + ec.message());
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    out << text;
    out.close();
    if (!out) throw Error(ErrorCode::IoError, "write to '" + path.string() + "' failed");
    return path;
}

std::filesystem::path emit_results(const SweepResult& result, const StudyConfig& cfg, OutputFormat format,
                                   const std::filesystem::path& dir) {
    if (result.rows.empty()) throw Error(ErrorCode::NoData, "no sweep rows to write");
    if (format == OutputFormat::Csv) {
        write_file(dir, "sweep.config", "# fracmix " + std::string(version()) + "\n" + to_config_text(cfg));
        return write_file(dir, "sweep.csv", sweep_csv(result.rows));
    }
    return write_file(dir, "sweep.json", sweep_json(result, cfg).dump(2) + "\n");
}

std::string basis_csv(const EigenBasis& basis) {
    std::ostringstream os;
    os << "j,lambda\n";
    for (int j = 0; j < basis.size(); ++j) os << j + 1 << ',' << fmt(basis.eigenvalues[j]) << '\n';
    return os.str();
}

nlohmann::json basis_json(const EigenBasis& basis) {
    const Grid& g = *basis.grid;
    nlohmann::json j;
    j["n"] = g.n;
    j["x"] = g.xs;
    if (g.domain.dim() == 2) j["y"] = g.ys;
    j["eigenvalues"] = std::vector<double>(basis.eigenvalues.data(), basis.eigenvalues.data() + basis.size());
    nlohmann::json vecs = nlohmann::json::array();
    for (int k = 0; k < basis.size(); ++k) {
        const GridFunction v = basis.mode(k);
        vecs.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    }
    j["vectors"] = std::move(vecs);
    return j;
}

std::string cylinder_csv(const CylinderField& U) {
    const Grid& g = *U.system->base.grid;
    const auto& y = U.system->cyl->y;
    const bool one = g.domain.dim() == 1;
    std::ostringstream os;
    os << (one ? "x,y,U\n" : "x,y_base,y,U\n");
    for (int k = 0; k < static_cast<int>(y.size()); ++k)
        for (int p = 0; p < g.node_count(); ++p) {
            os << fmt(g.x(p)) << ',';
            if (!one) os << fmt(g.y(p)) << ',';
            os << fmt(y[k]) << ',' << fmt(U.values(p, k)) << '\n';
        }
    return os.str();
}

std::string field_csv(const GridFunction& u, const Grid& grid) {
    std::ostringstream os;
    const bool one = grid.domain.dim() == 1;
    os << (one ? "x,u\n" : "x,y,u\n");
    for (int k = 0; k < grid.node_count(); ++k) {
        os << fmt(grid.x(k));
        if (!one) os << ',' << fmt(grid.y(k));
        os << ',' << fmt(u[k]) << '\n';
    }
    return os.str();
}

nlohmann::json field_json(const GridFunction& u, const Grid& grid) {
    nlohmann::json j;
    j["n"] = grid.n;
    j["x"] = grid.xs;
    if (grid.domain.dim() == 2) j["y"] = grid.ys;
    j["values"] = std::vector<double>(u.data(), u.data() + u.size());
    return j;
}

}  // namespace fracmix
