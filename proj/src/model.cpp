#include "lsi/model.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lsi/gaussian.hpp"

namespace lsi {

namespace {

void check_symmetric(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw DimensionMismatch("precision matrix must be square");
    for (int i = 0; i < m.rows(); ++i)
        for (int k = 0; k < i; ++k)
            if (std::abs(m(i, k) - m(k, i)) > 1e-12)
                throw DimensionMismatch("precision matrix must be symmetric");
}

void check_positive_definite(const Eigen::MatrixXd& m) {
    if (lambda_min_sym(m) <= 0.0)
        throw NotPositiveDefinite("precision matrix is not positive definite");
}

void check_site(const PotentialSpec& spec, int i) {
    if (i < 0 || i >= spec.n) throw DimensionMismatch("site index out of range");
}

}  // namespace

PotentialSpec make_quadratic(const Eigen::MatrixXd& m) {
    check_symmetric(m);
    check_positive_definite(m);
    PotentialSpec spec;
    spec.variant = Variant::Quadratic;
    spec.precision = m;
    spec.n = static_cast<int>(m.rows());
    if (spec.n < 1) throw DimensionMismatch("dimension must be at least 1");
    return spec;
}

PotentialSpec make_perturbed(const Eigen::MatrixXd& m, std::vector<Perturbation> phi) {
    check_symmetric(m);
    PotentialSpec spec;
    spec.variant = Variant::PerturbedQuadratic;
    spec.precision = m;
    spec.n = static_cast<int>(m.rows());
    if (spec.n < 1) throw DimensionMismatch("dimension must be at least 1");
    phi.resize(spec.n);
    for (const auto& p : phi)
        if (!std::isfinite(p.a) || !std::isfinite(p.omega))
            throw NotNormalizable("perturbation bounds must be finite");
    for (int i = 0; i < spec.n; ++i)
        if (!(m(i, i) > 0.0))
            throw NotNormalizable("conditional needs positive quadratic coefficient");
    spec.phi = std::move(phi);
    return spec;
}

PotentialSpec build_lattice(const std::vector<int>& dims, double j_coupling, double h) {
    if (dims.empty()) throw DimensionMismatch("lattice needs at least one dimension");
    for (int d : dims)
        if (d < 1) throw DimensionMismatch("lattice dimensions must be >= 1");
    if (!(h > 0.0)) throw NotPositiveDefinite("lattice self-term h must be positive");

    std::int64_t n64 = 1;
    for (int d : dims) n64 *= d;
    const int n = static_cast<int>(n64);

    // Lexicographic linear index over node coordinates.
    std::vector<std::int64_t> stride(dims.size());
    std::int64_t s = 1;
    for (int d = static_cast<int>(dims.size()) - 1; d >= 0; --d) {
        stride[d] = s;
        s *= dims[d];
    }

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    m.diagonal().setConstant(h);
    std::vector<int> coord(dims.size());
    for (int node = 0; node < n; ++node) {
        std::int64_t rest = node;
        for (std::size_t d = 0; d < dims.size(); ++d) {
            coord[d] = static_cast<int>(rest / stride[d]);
            rest %= stride[d];
        }
        for (std::size_t d = 0; d < dims.size(); ++d) {
            if (coord[d] + 1 < dims[d]) {
                const int nb = node + static_cast<int>(stride[d]);
                m(node, nb) = j_coupling;
                m(nb, node) = j_coupling;
            }
        }
    }
    return make_quadratic(m);
}

double potential_value(const PotentialSpec& spec, const Eigen::VectorXd& x) {
    if (x.size() != spec.n) throw DimensionMismatch("potential_value: wrong dimension");
    double v = 0.5 * x.dot(spec.precision * x);
    if (spec.has_perturbations())
        for (int i = 0; i < spec.n; ++i) v += spec.phi[i].value(x(i));
    return v;
}

Eigen::VectorXd grad_potential(const PotentialSpec& spec, const Eigen::VectorXd& x) {
    if (x.size() != spec.n) throw DimensionMismatch("grad_potential: wrong dimension");
    Eigen::VectorXd g = spec.precision * x;
    if (spec.has_perturbations())
        for (int i = 0; i < spec.n; ++i) g(i) += spec.phi[i].deriv(x(i));
    return g;
}

double mixed_partial(const PotentialSpec& spec, int i, int k, const Eigen::VectorXd& x) {
    check_site(spec, i);
    check_site(spec, k);
    if (i == k) throw SameIndex("mixed_partial requires i != k");
    if (x.size() != spec.n) throw DimensionMismatch("mixed_partial: wrong dimension");
    // Perturbations are diagonal, so off-diagonal second derivatives are M_ik.
    return spec.precision(i, k);
}

Conditional1D conditional(const PotentialSpec& spec, int i, const Eigen::VectorXd& xbar) {
    check_site(spec, i);
    if (xbar.size() != spec.n - 1)
        throw DimensionMismatch("conditional: xbar must have length n-1");

    const double mii = spec.precision(i, i);
    double lin = 0.0;
    for (int k = 0; k < spec.n; ++k) {
        if (k == i) continue;
        const double xk = xbar(k < i ? k : k - 1);
        lin += spec.precision(i, k) * xk;
    }
    if (!(mii > 0.0)) throw NotNormalizable("conditional is not normalizable on R");

    Conditional1D c;
    c.site = i;
    if (spec.variant == Variant::Quadratic) {
        c.gaussian = true;
        c.mean = -lin / mii;
        c.var = 1.0 / mii;
        c.log_density = [mii, lin](double xi) { return -0.5 * mii * xi * xi - lin * xi; };
    } else {
        const Perturbation p = spec.phi[i];
        c.gaussian = p.zero();
        c.mean = -lin / mii;
        c.var = 1.0 / mii;
        c.log_density = [mii, lin, p](double xi) {
            return -0.5 * mii * xi * xi - lin * xi - p.value(xi);
        };
    }
    return c;
}

double conditional_lsi_rho(const PotentialSpec& spec, int i) {
    check_site(spec, i);
    const double c = spec.precision(i, i);
    switch (spec.variant) {
        case Variant::Quadratic:
            return c;
        case Variant::PerturbedQuadratic:
            return c * std::exp(-4.0 * spec.phi[i].sup_phi());
    }
    throw NoDecomposition("unsupported variant");
}

double spec_rho(const PotentialSpec& spec) {
    double rho = conditional_lsi_rho(spec, 0);
    for (int i = 1; i < spec.n; ++i) rho = std::min(rho, conditional_lsi_rho(spec, i));
    return rho;
}

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ParseError("unknown key '" + it.key() + "' in " + where);
}

Eigen::MatrixXd parse_precision(const json& p) {
    if (!p.is_object()) throw ParseError("'precision' must be an object");
    reject_unknown_keys(p, {"dense", "n", "sparse"}, "precision");
    if (p.contains("dense")) {
        if (p.contains("n") || p.contains("sparse"))
            throw ParseError("precision: give either 'dense' or 'n'+'sparse'");
        const auto& rows = p.at("dense");
        const int n = static_cast<int>(rows.size());
        if (n < 1) throw ParseError("precision: empty matrix");
        Eigen::MatrixXd m(n, n);
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(rows[i].size()) != n)
                throw ParseError("precision: ragged dense matrix");
            for (int k = 0; k < n; ++k) m(i, k) = rows[i][k].get<double>();
        }
        return m;
    }
    if (!p.contains("n") || !p.contains("sparse"))
        throw ParseError("precision: need 'dense' or 'n'+'sparse'");
    const int n = p.at("n").get<int>();
    if (n < 1) throw ParseError("precision: n must be >= 1");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : p.at("sparse")) {
        if (!e.is_array() || e.size() != 3)
            throw ParseError("precision: sparse entries are [i, k, value]");
        const int i = e[0].get<int>();
        const int k = e[1].get<int>();
        if (i < 0 || i >= n || k < 0 || k >= n)
            throw ParseError("precision: sparse index out of range");
        const double v = e[2].get<double>();
        m(i, k) = v;
        m(k, i) = v;
    }
    return m;
}

}  // namespace

PotentialSpec model_from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const std::exception& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("model file must be a JSON object");
    reject_unknown_keys(doc, {"variant", "precision", "perturbations", "lattice"}, "model");
    const std::string variant = doc.at("variant").get<std::string>();

    if (variant == "lattice") {
        if (!doc.contains("lattice")) throw ParseError("lattice model needs 'lattice' block");
        if (doc.contains("precision") || doc.contains("perturbations"))
            throw ParseError("lattice model takes only the 'lattice' block");
        const auto& l = doc.at("lattice");
        reject_unknown_keys(l, {"dims", "j", "h"}, "lattice");
        std::vector<int> dims;
        for (const auto& d : l.at("dims")) dims.push_back(d.get<int>());
        return build_lattice(dims, l.at("j").get<double>(), l.at("h").get<double>());
    }

    if (!doc.contains("precision")) throw ParseError("model needs 'precision'");
    Eigen::MatrixXd m = parse_precision(doc.at("precision"));

    if (variant == "quadratic") {
        if (doc.contains("perturbations"))
            throw ParseError("quadratic model cannot carry perturbations");
        return make_quadratic(m);
    }
    if (variant == "perturbed_quadratic") {
        std::vector<Perturbation> phi(m.rows());
        if (doc.contains("perturbations")) {
            for (const auto& e : doc.at("perturbations")) {
                reject_unknown_keys(e, {"site", "a", "omega"}, "perturbation");
                const int site = e.at("site").get<int>();
                if (site < 0 || site >= m.rows())
                    throw ParseError("perturbation site out of range");
                phi[site].a = e.at("a").get<double>();
                phi[site].omega = e.at("omega").get<double>();
            }
        }
        return make_perturbed(m, std::move(phi));
    }
    throw ParseError("unknown variant '" + variant + "'");
}

PotentialSpec load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json_text(ss.str());
}

std::string model_to_json_text(const PotentialSpec& spec) {
    std::ostringstream out;
    out.precision(17);
    out << "{\n  \"variant\": \""
        << (spec.variant == Variant::Quadratic ? "quadratic" : "perturbed_quadratic")
        << "\",\n  \"precision\": {\"n\": " << spec.n << ", \"sparse\": [";
    bool first = true;
    for (int i = 0; i < spec.n; ++i)
        for (int k = i; k < spec.n; ++k)
            if (spec.precision(i, k) != 0.0) {
                if (!first) out << ", ";
                out << "[" << i << ", " << k << ", " << spec.precision(i, k) << "]";
                first = false;
            }
    out << "]}";
    if (spec.has_perturbations()) {
        out << ",\n  \"perturbations\": [";
        first = true;
        for (int i = 0; i < spec.n; ++i)
            if (!spec.phi[i].zero()) {
                if (!first) out << ", ";
                out << "{\"site\": " << i << ", \"a\": " << spec.phi[i].a
                    << ", \"omega\": " << spec.phi[i].omega << "}";
                first = false;
            }
        out << "]";
    }
    out << "\n}\n";
    return out.str();
}

}  // namespace lsi
