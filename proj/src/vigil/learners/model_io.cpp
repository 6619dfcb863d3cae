#include "vigil/learners/model_io.hpp"

#include <fstream>
#include <string>

#include "vigil/learners/model_json.hpp"

namespace vigil::learners {

using nlohmann::json;

void to_json(json& j, const OcsvmModel& m) {
    j = json{{"sv", m.sv},
             {"alpha", m.alpha},
             {"sv_index", m.sv_index},
             {"rho", m.rho},
             {"gamma", m.gamma},
             {"nu", m.nu},
             {"n_train", m.n_train},
             {"iterations", m.iterations},
             {"kkt_residual", m.kkt_residual}};
}

void from_json(const json& j, OcsvmModel& m) {
    j.at("sv").get_to(m.sv);
    j.at("alpha").get_to(m.alpha);
    j.at("sv_index").get_to(m.sv_index);
    j.at("rho").get_to(m.rho);
    j.at("gamma").get_to(m.gamma);
    j.at("nu").get_to(m.nu);
    j.at("n_train").get_to(m.n_train);
    j.at("iterations").get_to(m.iterations);
    j.at("kkt_residual").get_to(m.kkt_residual);
}

void to_json(json& j, const IsoForestModel::Tree& t) {
    j = json::array();
    for (const auto& n : t.nodes) j.push_back({n.feature, n.split, n.left, n.right, n.size});
}

void from_json(const json& j, IsoForestModel::Tree& t) {
    t.nodes.clear();
    t.nodes.reserve(j.size());
    for (const auto& n : j) {
        t.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                           n.at(3).get<int>(), n.at(4).get<int>()});
    }
}

void to_json(json& j, const IsoForestModel& m) {
    j = json{{"trees", m.trees},
             {"psi", m.psi},
             {"n_trees", m.n_trees},
             {"score_threshold", m.score_threshold}};
}

void from_json(const json& j, IsoForestModel& m) {
    j.at("trees").get_to(m.trees);
    j.at("psi").get_to(m.psi);
    j.at("n_trees").get_to(m.n_trees);
    j.at("score_threshold").get_to(m.score_threshold);
}

void to_json(json& j, const LofModel& m) {
    j = json{{"points", m.points},
             {"k", m.k},
             {"lof_threshold", m.lof_threshold},
             {"kdist", m.kdist},
             {"lrd", m.lrd},
             {"train_lof", m.train_lof}};
}

void from_json(const json& j, LofModel& m) {
    j.at("points").get_to(m.points);
    j.at("k").get_to(m.k);
    j.at("lof_threshold").get_to(m.lof_threshold);
    j.at("kdist").get_to(m.kdist);
    j.at("lrd").get_to(m.lrd);
    j.at("train_lof").get_to(m.train_lof);
}

void to_json(json& j, const GbtConfig& c) {
    j = json{{"n_rounds", c.n_rounds},
             {"max_depth", c.max_depth},
             {"learning_rate", c.learning_rate},
             {"l2_lambda", c.l2_lambda}};
}

void from_json(const json& j, GbtConfig& c) {
    j.at("n_rounds").get_to(c.n_rounds);
    j.at("max_depth").get_to(c.max_depth);
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("l2_lambda").get_to(c.l2_lambda);
}

void to_json(json& j, const GbtModel::Tree& t) {
    j = json::array();
    for (const auto& n : t.nodes) j.push_back({n.feature, n.split, n.left, n.right, n.weight});
}

void from_json(const json& j, GbtModel::Tree& t) {
    t.nodes.clear();
    t.nodes.reserve(j.size());
    for (const auto& n : j) {
        t.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                           n.at(3).get<int>(), n.at(4).get<double>()});
    }
}

void to_json(json& j, const GbtModel& m) {
    j = json{{"trees", m.trees},
             {"config", m.config},
             {"base_score", m.base_score},
             {"n_features", m.n_features},
             {"train_logloss", m.train_logloss}};
}

void from_json(const json& j, GbtModel& m) {
    j.at("trees").get_to(m.trees);
    j.at("config").get_to(m.config);
    j.at("base_score").get_to(m.base_score);
    j.at("n_features").get_to(m.n_features);
    j.at("train_logloss").get_to(m.train_logloss);
}

namespace {

json read_model_file(const std::filesystem::path& path, const char* kind) {
    std::ifstream in(path);
    if (!in) throw MissingFile("cannot open model file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("v") || !doc["v"].is_number_integer())
        throw ModelFormatError(path.string() + ": missing format version");
    if (doc["v"].get<int>() != 1)
        throw ModelFormatError(path.string() + ": unsupported format version " + doc["v"].dump());
    if (!doc.contains("kind") || doc["kind"] != kind)
        throw ModelFormatError(path.string() + ": expected kind \"" + std::string(kind) +
                               "\", got " + (doc.contains("kind") ? doc["kind"].dump() : "none"));
    return doc;
}

void write_model_file(json doc, const char* kind, const std::filesystem::path& path) {
    doc["v"] = 1;
    doc["kind"] = kind;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file " + path.string());
    out << doc.dump() << '\n';
    if (!out) throw IoError("short write to " + path.string());
}

template <typename Model>
Model load_model(const std::filesystem::path& path, const char* kind) {
    const json doc = read_model_file(path, kind);
    try {
        return doc.get<Model>();
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

} // namespace

void save_ocsvm(const OcsvmModel& m, const std::filesystem::path& path) {
    write_model_file(m, "ocsvm", path);
}

OcsvmModel load_ocsvm(const std::filesystem::path& path) {
    return load_model<OcsvmModel>(path, "ocsvm");
}

void save_iforest(const IsoForestModel& m, const std::filesystem::path& path) {
    write_model_file(m, "iforest", path);
}

IsoForestModel load_iforest(const std::filesystem::path& path) {
    return load_model<IsoForestModel>(path, "iforest");
}

void save_lof(const LofModel& m, const std::filesystem::path& path) {
    write_model_file(m, "lof", path);
}

LofModel load_lof(const std::filesystem::path& path) { return load_model<LofModel>(path, "lof"); }

void save_gbt(const GbtModel& m, const std::filesystem::path& path) {
    write_model_file(m, "gbt", path);
}

GbtModel load_gbt(const std::filesystem::path& path) { return load_model<GbtModel>(path, "gbt"); }

bool operator==(const OcsvmModel& a, const OcsvmModel& b) {
    return a.sv == b.sv && a.alpha == b.alpha && a.sv_index == b.sv_index && a.rho == b.rho &&
           a.gamma == b.gamma && a.nu == b.nu && a.n_train == b.n_train &&
           a.iterations == b.iterations && a.kkt_residual == b.kkt_residual;
}

bool operator==(const IsoForestModel::Node& a, const IsoForestModel::Node& b) {
    return a.feature == b.feature && a.split == b.split && a.left == b.left &&
           a.right == b.right && a.size == b.size;
}

bool operator==(const IsoForestModel::Tree& a, const IsoForestModel::Tree& b) {
    return a.nodes == b.nodes;
}

bool operator==(const IsoForestModel& a, const IsoForestModel& b) {
    return a.trees == b.trees && a.psi == b.psi && a.n_trees == b.n_trees &&
           a.score_threshold == b.score_threshold;
}

bool operator==(const LofModel& a, const LofModel& b) {
    return a.points == b.points && a.k == b.k && a.lof_threshold == b.lof_threshold &&
           a.kdist == b.kdist && a.lrd == b.lrd && a.train_lof == b.train_lof;
}

bool operator==(const GbtModel::Node& a, const GbtModel::Node& b) {
    return a.feature == b.feature && a.split == b.split && a.left == b.left &&
           a.right == b.right && a.weight == b.weight;
}

bool operator==(const GbtModel::Tree& a, const GbtModel::Tree& b) { return a.nodes == b.nodes; }

bool operator==(const GbtConfig& a, const GbtConfig& b) {
    return a.n_rounds == b.n_rounds && a.max_depth == b.max_depth &&
           a.learning_rate == b.learning_rate && a.l2_lambda == b.l2_lambda;
}

bool operator==(const GbtModel& a, const GbtModel& b) {
    return a.trees == b.trees && a.config == b.config && a.base_score == b.base_score &&
           a.n_features == b.n_features && a.train_logloss == b.train_logloss;
}

} // namespace vigil::learners
