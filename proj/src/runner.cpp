#include "lsi/runner.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsi/certify.hpp"
#include "lsi/dynamics.hpp"
#include "lsi/gridops.hpp"
#include "lsi/metrics.hpp"
#include "lsi/model.hpp"

namespace lsi {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_or_empty(double v) { return std::isnan(v) ? "" : fmt(v); }

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write file: " + path);
    out << text;
}

GaussianDist gaussian_from_json(const nlohmann::json& j, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "mean" && it.key() != "cov")
            throw ParseError("unknown key '" + it.key() + "' in " + where);
    GaussianDist g;
    const auto& mean = j.at("mean");
    const int n = static_cast<int>(mean.size());
    g.mean.resize(n);
    for (int i = 0; i < n; ++i) g.mean(i) = mean[i].get<double>();
    const auto& cov = j.at("cov");
    if (static_cast<int>(cov.size()) != n) throw ParseError(where + ": cov shape mismatch");
    g.cov.resize(n, n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(cov[i].size()) != n)
            throw ParseError(where + ": cov shape mismatch");
        for (int k = 0; k < n; ++k) g.cov(i, k) = cov[i][k].get<double>();
    }
    return g;
}

GaussianDist gibbs_gaussian(const PotentialSpec& spec) {
    GaussianDist q;
    q.mean = Eigen::VectorXd::Zero(spec.n);
    q.cov = Eigen::LLT<Eigen::MatrixXd>(spec.precision)
                .solve(Eigen::MatrixXd::Identity(spec.n, spec.n));
    return q;
}

int run_certify(const RunConfig& config) {
    const PotentialSpec spec = load_model(config.model_path);
    const Certificate cert = certify(spec);

    std::ostringstream doc;
    doc << "{\n  \"model_hash\": \"" << file_hash(config.model_path) << "\",\n"
        << "  \"model\": \"" << config.model_path << "\",\n"
        << "  \"certificate\": ";
    std::istringstream certjson(certificate_to_json(cert));
    std::string line;
    bool first = true;
    while (std::getline(certjson, line)) {
        if (!first) doc << "\n  ";
        doc << line;
        first = false;
    }
    doc << "\n}\n";

    std::cout << "model " << config.model_path << " (n=" << spec.n << ")\n"
              << "rho " << fmt(cert.rho) << "  |A1| " << fmt(cert.norm_a1) << "  |A2| "
              << fmt(cert.norm_a2) << "  delta " << fmt(cert.delta) << "\n";
    if (cert.pass)
        std::cout << "certified: LSI constant >= " << fmt(*cert.lsi_lower)
                  << " (rho delta / 2), Lipschitz bound " << fmt(*cert.lipschitz_bound)
                  << "\n";
    else
        std::cout << "not certified: delta <= 0\n";

    if (config.out_path.empty())
        std::cout << doc.str();
    else
        write_file(config.out_path, doc.str());
    return cert.pass ? 0 : 1;
}

int run_lattice(const RunConfig& config) {
    const PotentialSpec spec = build_lattice(config.lattice_dims, config.lattice_j,
                                             config.lattice_h);
    const std::string text = model_to_json_text(spec);
    if (config.out_path.empty())
        std::cout << text;
    else
        write_file(config.out_path, text);
    return 0;
}

struct VerifyCase {
    std::string id;
    std::string inequality;  // "lsi" | "otto_villani"
    std::string backend = "gaussian";
    std::string model;
    GaussianDist p;
    double constant = 0.0;
    std::string constant_source = "value";  // "value" | "certified" | "lambda_min"
    int grid_points = 48;
    double box = 8.0;
    double tolerance = 1e-9;
};

int run_verify(const RunConfig& config) {
    std::ifstream in(config.scenario_path);
    if (!in) throw ParseError("cannot open scenario file: " + config.scenario_path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ParseError(std::string("scenario file is not valid JSON: ") + e.what());
    }
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (it.key() != "cases") throw ParseError("unknown key '" + it.key() + "' in scenario");

    std::ostringstream csv;
    csv << "case,D,I,W2,bound,slack,pass\n";
    bool all_pass = true;
    std::string first_failure;

    const std::set<std::string> allowed = {"id",    "inequality", "backend",
                                           "model", "p",          "constant",
                                           "grid",  "tolerance"};
    for (const auto& cj : doc.value("cases", nlohmann::json::array())) {
        for (auto it = cj.begin(); it != cj.end(); ++it)
            if (!allowed.count(it.key()))
                throw ParseError("unknown key '" + it.key() + "' in scenario case");
        VerifyCase vc;
        vc.id = cj.at("id").get<std::string>();
        vc.inequality = cj.at("inequality").get<std::string>();
        vc.backend = cj.value("backend", "gaussian");
        vc.model = cj.at("model").get<std::string>();
        vc.p = gaussian_from_json(cj.at("p"), "case p");
        if (cj.at("constant").is_string())
            vc.constant_source = cj.at("constant").get<std::string>();
        else
            vc.constant = cj.at("constant").get<double>();
        if (cj.contains("grid")) {
            vc.grid_points = cj.at("grid").value("points", 48);
            vc.box = cj.at("grid").value("box", 8.0);
        }
        vc.tolerance = cj.value("tolerance", 1e-9);
        if (vc.grid_points > kMaxGridPoints)
            throw UsageError("grid points exceed the capacity 64");

        const PotentialSpec spec = load_model(vc.model);
        double constant = vc.constant;
        if (vc.constant_source == "certified") {
            const Certificate cert = certify(spec);
            if (!cert.pass) throw NotCertified("scenario model is not certified");
            constant = *cert.lsi_lower;
        } else if (vc.constant_source == "lambda_min") {
            constant = lambda_min_sym(spec.precision);
        }

        SlackReport r;
        if (vc.backend == "gaussian") {
            const GaussianDist q = gibbs_gaussian(spec);
            r = vc.inequality == "lsi" ? check_lsi(vc.p, q, constant)
                                       : check_otto_villani(vc.p, q, constant);
        } else if (vc.backend == "grid") {
            const auto axes = box_axes(spec.n, vc.box, vc.grid_points);
            const GridDist q = grid_gibbs(spec, axes);
            const GridDist p = discretize(vc.p, axes).dist;
            r = vc.inequality == "lsi" ? check_lsi(p, q, constant)
                                       : check_otto_villani(p, q, constant);
        } else {
            throw ParseError("unknown backend '" + vc.backend + "'");
        }

        const bool pass = r.defined && r.slack >= -vc.tolerance;
        if (!pass && all_pass) {
            all_pass = false;
            first_failure = vc.id + " slack " + fmt(r.slack);
        }
        // keeps failures attributable to the constant and model actually used
        std::cout << "case " << vc.id << ": constant " << fmt(constant) << " ("
                  << vc.constant_source << "), model " << file_hash(vc.model) << "\n";
        csv << vc.id << "," << (r.d.infinite ? "inf" : fmt(r.d.value)) << ","
            << (vc.inequality == "lsi"
                    ? (r.fisher_info.infinite ? "inf" : fmt(r.fisher_info.value))
                    : "")
            << "," << (vc.inequality == "otto_villani" ? fmt(r.w2_value) : "") << ","
            << fmt(r.bound) << "," << fmt(r.slack) << "," << (pass ? "true" : "false")
            << "\n";
    }

    if (config.out_path.empty())
        std::cout << csv.str();
    else
        write_file(config.out_path, csv.str());
    if (!all_pass) std::cout << "failed: " << first_failure << "\n";
    return all_pass ? 0 : 1;
}

int run_simulate(const RunConfig& config) {
    const PotentialSpec spec = load_model(config.model_path);
    const Certificate cert = certify(spec);
    if (!cert.pass) {
        std::cout << "not certified: delta " << fmt(cert.delta) << "\n";
        return 1;
    }

    GaussianDist p0;
    if (config.p0_path.empty()) {
        p0.mean = Eigen::VectorXd::Ones(spec.n);
        p0.cov = Eigen::MatrixXd::Identity(spec.n, spec.n);
    } else {
        std::ifstream in(config.p0_path);
        if (!in) throw ParseError("cannot open p0 file: " + config.p0_path);
        nlohmann::json j;
        in >> j;
        p0 = gaussian_from_json(j, "p0");
    }
    if (p0.dim() != spec.n) throw UsageError("p0 dimension does not match the model");

    Trace trace;
    if (config.backend == "gaussian") {
        trace = run_interpolation(p0, spec, cert, config.steps);
        trace.seed = config.seed;
    } else if (config.backend == "grid") {
        if (spec.n > 2) throw UsageError("grid backend supports n <= 2");
        if (config.grid_points > 16)
            throw UsageError("grid backend supports at most 16 points per axis");
        const auto axes = box_axes(spec.n, config.box, config.grid_points);
        const GridDist p0g = discretize(p0, axes).dist;
        trace = run_interpolation(p0g, spec, cert, config.steps);
        trace.seed = config.seed;
    } else {
        throw UsageError("unknown backend '" + config.backend + "'");
    }

    std::ostringstream csv;
    csv << "t,D_t,recursion_slack,w2_skip2_bound\n";
    for (const auto& rec : trace.records)
        csv << rec.t << "," << fmt_or_empty(rec.d_t) << ","
            << fmt_or_empty(rec.recursion_slack) << ","
            << fmt_or_empty(rec.w2_skip2_bound) << "\n";

    const EntropyBoundReport ml = entropy_bound_check(trace, cert);
    double min_rec_slack = std::numeric_limits<double>::infinity();
    double max_skip_violation = -std::numeric_limits<double>::infinity();
    for (const auto& rec : trace.records) {
        if (!std::isnan(rec.recursion_slack))
            min_rec_slack = std::min(min_rec_slack, rec.recursion_slack);
        if (!std::isnan(rec.w2_skip2_bound))
            max_skip_violation =
                std::max(max_skip_violation,
                         rec.w2_skip2_bound -
                             2.0 / cert.rho * trace.records[rec.t - 2].d_t);
    }

    // The per-site bounds lean on the continuous one-dimensional theory;
    // grid conditionals satisfy them only up to a quantization budget of
    // order n h^2.
    double budget = 0.0;
    if (config.backend == "grid") {
        const double h = 2.0 * config.box / config.grid_points;
        budget = spec.n * h * h;
    }
    const double tol = config.tol + budget;

    std::string failing;
    if (ml.slack < -tol) failing = "entropy_bound slack " + fmt(ml.slack);
    else if (ml.d0_bound_slack < -tol) failing = "d0_bound slack " + fmt(ml.d0_bound_slack);
    else if (ml.d1_bound_slack < -tol) failing = "d1_bound slack " + fmt(ml.d1_bound_slack);
    else if (min_rec_slack < -tol) failing = "recursion slack " + fmt(min_rec_slack);
    else if (max_skip_violation > tol)
        failing = "w2_skip2 bound excess " + fmt(max_skip_violation);

    std::ostringstream summary;
    summary << "{\n  \"model_hash\": \"" << file_hash(config.model_path) << "\",\n"
            << "  \"backend\": \"" << config.backend << "\",\n"
            << "  \"steps\": " << config.steps << ",\n"
            << "  \"grid_points\": " << config.grid_points << ",\n"
            << "  \"box\": " << fmt(config.box) << ",\n"
            << "  \"tol\": " << fmt(config.tol) << ",\n"
            << "  \"seed\": " << config.seed << ",\n"
            << "  \"certificate\": {\"rho\": " << fmt(cert.rho)
            << ", \"delta\": " << fmt(cert.delta)
            << ", \"lsi_lower\": " << fmt(*cert.lsi_lower) << "},\n"
            << "  \"d_initial\": " << fmt(trace.d_initial) << ",\n"
            << "  \"fisher_initial\": " << fmt(trace.fisher_initial) << ",\n"
            << "  \"d_final\": " << fmt(trace.d_final) << ",\n"
            << "  \"entropy_bound\": {\"lhs\": " << fmt(ml.lhs) << ", \"rhs\": " << fmt(ml.rhs)
            << ", \"slack\": " << fmt(ml.slack) << "},\n"
            << "  \"d0_bound_slack\": " << fmt(ml.d0_bound_slack) << ",\n"
            << "  \"d1_bound_slack\": " << fmt(ml.d1_bound_slack) << ",\n"
            << "  \"aux_partial_slack\": " << fmt(ml.aux_partial_slack) << ",\n"
            << "  \"min_recursion_slack\": " << fmt(min_rec_slack) << ",\n"
            << "  \"marginal_consistency\": " << fmt(trace.marginal_consistency) << ",\n"
            << "  \"pass\": " << (failing.empty() ? "true" : "false") << "\n}\n";

    if (config.out_path.empty())
        std::cout << csv.str();
    else
        write_file(config.out_path, csv.str());
    std::string spath = config.summary_path;
    if (spath.empty() && !config.out_path.empty()) {
        spath = config.out_path;
        const auto dot = spath.rfind('.');
        if (dot != std::string::npos) spath.resize(dot);
        spath += ".summary.json";
    }
    if (spath.empty())
        std::cout << summary.str();
    else
        write_file(spath, summary.str());

    if (!failing.empty()) {
        std::cout << "failed: " << failing << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

RunConfig parse_config(const std::vector<std::string>& args) {
    RunConfig config;
    CLI::App app{"certifier and numerical verifier for explicit LSI constants"};
    app.require_subcommand(1);

    auto* cert = app.add_subcommand("certify", "evaluate the contractivity condition");
    cert->add_option("--model", config.model_path, "model spec file (JSON)")->required();
    cert->add_option("--out", config.out_path, "certificate JSON output path");

    auto* verify = app.add_subcommand("verify", "check inequalities from a scenario file");
    verify->add_option("--scenarios", config.scenario_path, "scenario JSON file")
        ->required();
    verify->add_option("--out", config.out_path, "CSV output path");

    auto* sim = app.add_subcommand("simulate", "run the interpolation process");
    sim->add_option("--model", config.model_path, "model spec file (JSON)")->required();
    sim->add_option("--backend", config.backend, "gaussian or grid")
        ->check(CLI::IsMember({"gaussian", "grid"}));
    sim->add_option("--steps", config.steps, "number of recorded steps T")
        ->check(CLI::PositiveNumber);
    sim->add_option("--grid-points", config.grid_points, "grid points per axis");
    sim->add_option("--box", config.box, "half width of the grid box")
        ->check(CLI::PositiveNumber);
    sim->add_option("--p0", config.p0_path, "initial Gaussian law (JSON)");
    sim->add_option("--out", config.out_path, "trace CSV output path");
    sim->add_option("--summary", config.summary_path, "summary JSON output path");
    sim->add_option("--tol", config.tol, "slack tolerance")->check(CLI::PositiveNumber);
    sim->add_option("--seed", config.seed, "seed recorded in reports");

    auto* lat = app.add_subcommand("lattice", "emit a generated lattice model spec");
    lat->set_help_flag("--help", "print help");
    lat->add_option("--dims", config.lattice_dims, "lattice dimensions")->required();
    lat->add_option("--j", config.lattice_j, "nearest-neighbor coupling");
    lat->add_option("--h", config.lattice_h, "self term (diagonal)");
    lat->add_option("--out", config.out_path, "model JSON output path");

    std::vector<const char*> argv;
    argv.push_back("lsi");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            // --help and friends
            app.exit(e);
            throw UsageError("help");
        }
        throw UsageError(e.what());
    }

    if (cert->parsed()) config.command = RunConfig::Command::Certify;
    if (verify->parsed()) config.command = RunConfig::Command::Verify;
    if (sim->parsed()) config.command = RunConfig::Command::Simulate;
    if (lat->parsed()) config.command = RunConfig::Command::Lattice;

    if (config.grid_points < 2 || config.grid_points > kMaxGridPoints)
        throw UsageError("grid points must be in [2, 64]");
    return config;
}

int run(const RunConfig& config) {
    switch (config.command) {
        case RunConfig::Command::Certify:
            return run_certify(config);
        case RunConfig::Command::Verify:
            return run_verify(config);
        case RunConfig::Command::Simulate:
            return run_simulate(config);
        case RunConfig::Command::Lattice:
            return run_lattice(config);
    }
    throw UsageError("unknown command");
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file for hashing: " + path);
    std::uint64_t h = 1469598103934665603ull;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace lsi
