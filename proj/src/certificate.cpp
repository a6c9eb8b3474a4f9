#include "ccmnet/certificate.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ccmnet {

namespace {

using nlohmann::json;

json bound_to_json(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? json("inf") : json("-inf");
}

double bound_from_json(const json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw std::runtime_error("certificate: bad interval bound '" + s + "'");
    }
    return j.get<double>();
}

json variable_to_json(const Variable& v) {
    return json::array({v.kind == Variable::Kind::State ? "x" : "u", v.node, v.component});
}

Variable variable_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3)
        throw std::runtime_error("certificate: bad variable encoding");
    const std::string kind = j[0].get<std::string>();
    if (kind != "x" && kind != "u")
        throw std::runtime_error("certificate: bad variable kind '" + kind + "'");
    return {j[1].get<int>(), kind == "x" ? Variable::Kind::State : Variable::Kind::Input,
            j[2].get<int>()};
}

json poly_to_json(const Polynomial& p) {
    json terms = json::array();
    for (const auto& [mono, coeff] : p.terms()) {
        json m = json::array();
        for (const auto& [v, e] : mono) m.push_back(json::array({variable_to_json(v), e}));
        terms.push_back(json::object({{"c", coeff}, {"m", m}}));
    }
    return terms;
}

Polynomial poly_from_json(const json& j) {
    Polynomial p;
    for (const json& t : j) {
        Monomial mono;
        for (const json& f : t.at("m"))
            mono.push_back({variable_from_json(f.at(0)), f.at(1).get<int>()});
        p = p + Polynomial::term(t.at("c").get<double>(), mono);
    }
    return p;
}

json matrix_to_json(const PolyMatrix& M) {
    json rows = json::array();
    for (int r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < M.cols(); ++c) row.push_back(poly_to_json(M.at(r, c)));
        rows.push_back(row);
    }
    return json::object({{"rows", M.rows()}, {"cols", M.cols()}, {"entries", rows}});
}

PolyMatrix matrix_from_json(const json& j) {
    PolyMatrix M(j.at("rows").get<int>(), j.at("cols").get<int>());
    const json& rows = j.at("entries");
    for (int r = 0; r < M.rows(); ++r)
        for (int c = 0; c < M.cols(); ++c) M.at(r, c) = poly_from_json(rows.at(r).at(c));
    return M;
}

json region_to_json(const Region& region) {
    json j;
    if (auto d = region.stateDefault())
        j["state_default"] = json::array({bound_to_json(d->first), bound_to_json(d->second)});
    if (auto d = region.inputDefault())
        j["input_default"] = json::array({bound_to_json(d->first), bound_to_json(d->second)});
    json ov = json::array();
    for (const auto& [v, iv] : region.overrides())
        ov.push_back(json::array(
            {variable_to_json(v), bound_to_json(iv.first), bound_to_json(iv.second)}));
    j["overrides"] = ov;
    return j;
}

Region region_from_json(const json& j) {
    Region region;
    if (j.contains("state_default"))
        region.setStateDefault(bound_from_json(j["state_default"].at(0)),
                               bound_from_json(j["state_default"].at(1)));
    if (j.contains("input_default"))
        region.setInputDefault(bound_from_json(j["input_default"].at(0)),
                               bound_from_json(j["input_default"].at(1)));
    for (const json& o : j.at("overrides"))
        region.setInterval(variable_from_json(o.at(0)), bound_from_json(o.at(1)),
                           bound_from_json(o.at(2)));
    return region;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[static_cast<long>(i)] = j.at(i).get<double>();
    return v;
}

}  // namespace

std::string certificate_to_string(const CCMCertificate& cert) {
    json j;
    j["format"] = "ccmnet-certificate";
    j["version"] = 1;
    j["lambda"] = cert.lambda;
    j["epsilon"] = cert.epsilon;
    j["w_low"] = cert.w_low;
    j["w_high"] = cert.w_high;
    j["gp_fingerprint"] = cert.gp_fingerprint;
    j["gc_fingerprint"] = cert.gc_fingerprint;
    j["used_chordal"] = cert.used_chordal;
    j["cliques"] = cert.cliques;
    json fe = json::array();
    for (const auto& [a, b] : cert.fill_edges) fe.push_back(json::array({a, b}));
    j["fill_edges"] = fe;
    json cs = json::array();
    for (const auto& [key, S] : cert.clique_slacks) {
        json e = matrix_to_json(S);
        e["node"] = key.first;
        e["clique"] = key.second;
        cs.push_back(e);
    }
    j["clique_slacks"] = cs;
    j["margin_achieved"] = cert.margin_achieved;
    j["region"] = region_to_json(cert.region);
    json wb = json::array();
    for (const PolyMatrix& W : cert.W_blocks) wb.push_back(matrix_to_json(W));
    j["W_blocks"] = wb;
    json yb = json::array();
    for (const auto& [ij, Y] : cert.Y_blocks) {
        json e = matrix_to_json(Y);
        e["i"] = ij.first;
        e["j"] = ij.second;
        yb.push_back(e);
    }
    j["Y_blocks"] = yb;
    const VerificationReport& v = cert.verification;
    j["verification"] = json::object({{"pass", v.pass},
                                      {"worst_eigenvalue", v.worst_eigenvalue},
                                      {"worst_x", vector_to_json(v.worst_x)},
                                      {"worst_u", vector_to_json(v.worst_u)},
                                      {"density", v.density},
                                      {"per_clique", v.per_clique},
                                      {"samples", v.samples}});
    return j.dump(2) + "\n";
}

CCMCertificate certificate_from_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("certificate: JSON parse error: ") + e.what());
    }
    try {
        if (j.at("format") != "ccmnet-certificate")
            throw std::runtime_error("certificate: unrecognized format tag");
        CCMCertificate cert;
        cert.lambda = j.at("lambda").get<double>();
        cert.epsilon = j.at("epsilon").get<double>();
        cert.w_low = j.at("w_low").get<double>();
        cert.w_high = j.at("w_high").get<double>();
        cert.gp_fingerprint = j.at("gp_fingerprint").get<std::string>();
        cert.gc_fingerprint = j.at("gc_fingerprint").get<std::string>();
        cert.used_chordal = j.at("used_chordal").get<bool>();
        cert.cliques = j.at("cliques").get<std::vector<std::vector<int>>>();
        for (const json& e : j.at("fill_edges"))
            cert.fill_edges.insert({e.at(0).get<int>(), e.at(1).get<int>()});
        if (j.contains("clique_slacks"))
            for (const json& e : j.at("clique_slacks"))
                cert.clique_slacks[{e.at("node").get<int>(), e.at("clique").get<int>()}] =
                    matrix_from_json(e);
        cert.margin_achieved = j.at("margin_achieved").get<double>();
        cert.region = region_from_json(j.at("region"));
        for (const json& w : j.at("W_blocks")) cert.W_blocks.push_back(matrix_from_json(w));
        for (const json& y : j.at("Y_blocks"))
            cert.Y_blocks[{y.at("i").get<int>(), y.at("j").get<int>()}] = matrix_from_json(y);
        const json& v = j.at("verification");
        cert.verification.pass = v.at("pass").get<bool>();
        cert.verification.worst_eigenvalue = v.at("worst_eigenvalue").get<double>();
        cert.verification.worst_x = vector_from_json(v.at("worst_x"));
        cert.verification.worst_u = vector_from_json(v.at("worst_u"));
        cert.verification.density = v.at("density").get<int>();
        cert.verification.per_clique = v.at("per_clique").get<bool>();
        cert.verification.samples = v.at("samples").get<std::size_t>();
        return cert;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("certificate: malformed content: ") + e.what());
    }
}

void save_certificate(const CCMCertificate& cert, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("certificate: cannot open " + tmp + " for writing");
        out << certificate_to_string(cert);
        if (!out.good()) throw std::runtime_error("certificate: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("certificate: rename to " + path + " failed");
}

CCMCertificate load_certificate(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("certificate: cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return certificate_from_string(ss.str());
}

}  // namespace ccmnet
