#include "run_config.hpp"

#include "embedfuse/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace embedfuse::cli {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void reject_unknown(const json& section, const std::string& prefix, const std::set<std::string>& known) {
    if (!section.is_object()) {
        throw ConfigError(prefix.empty() ? "config" : prefix, "must be a JSON object");
    }
    for (const auto& [key, value] : section.items()) {
        if (!known.count(key)) {
            throw ConfigError(prefix.empty() ? key : prefix + "." + key, "unknown setting");
        }
    }
}

template <typename T>
void read(const json& section, const std::string& prefix, const char* key, T& target) {
    if (!section.contains(key)) {
        return;
    }
    try {
        target = section.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(prefix + "." + key, "has the wrong type");
    }
}

EmbeddingField parse_field(const std::string& value, const std::string& field) {
    if (value == "text") {
        return EmbeddingField::kText;
    }
    if (value == "image") {
        return EmbeddingField::kImage;
    }
    throw ConfigError(field, "must be \"text\" or \"image\"");
}

const char* field_name(EmbeddingField f) {
    return f == EmbeddingField::kText ? "text" : "image";
}

} // namespace

RunConfig run_config_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("config", std::string("not valid JSON: ") + e.what());
    }
    reject_unknown(root, "", {"seed", "filter", "head", "knn", "ensemble"});

    RunConfig config;
    if (root.contains("seed")) {
        try {
            config.seed = root.at("seed").get<std::uint64_t>();
        } catch (const json::exception&) {
            throw ConfigError("seed", "must be an unsigned integer");
        }
    }
    if (root.contains("filter")) {
        const auto& s = root.at("filter");
        reject_unknown(s, "filter", {"threshold", "field"});
        read(s, "filter", "threshold", config.filter.threshold);
        std::string field = field_name(config.filter.field);
        read(s, "filter", "field", field);
        config.filter.field = parse_field(field, "filter.field");
    }
    if (root.contains("head")) {
        const auto& s = root.at("head");
        reject_unknown(s, "head", {"lr_fc", "lr_vision", "epochs", "batch_size", "hidden_dim", "train_adapter",
                                   "train_proj", "freeze_alpha", "eps_ln"});
        auto& h = config.head;
        read(s, "head", "lr_fc", h.lr_fc);
        read(s, "head", "lr_vision", h.lr_vision);
        read(s, "head", "epochs", h.epochs);
        read(s, "head", "batch_size", h.batch_size);
        read(s, "head", "hidden_dim", h.hidden_dim);
        read(s, "head", "train_adapter", h.train_adapter);
        read(s, "head", "train_proj", h.train_proj);
        read(s, "head", "freeze_alpha", h.freeze_alpha);
        read(s, "head", "eps_ln", h.eps_ln);
    }
    if (root.contains("knn")) {
        const auto& s = root.at("knn");
        reject_unknown(s, "knn", {"k", "distance_dim", "delta", "coef", "index_space"});
        auto& k = config.knn;
        read(s, "knn", "k", k.k);
        read(s, "knn", "distance_dim", k.distance_dim);
        read(s, "knn", "delta", k.delta);
        read(s, "knn", "coef", k.coef);
        std::string space = field_name(k.index_space);
        read(s, "knn", "index_space", space);
        k.index_space = parse_field(space, "knn.index_space");
    }
    if (root.contains("ensemble")) {
        const auto& s = root.at("ensemble");
        reject_unknown(s, "ensemble", {"alpha_ens", "normalize_inputs", "grid"});
        read(s, "ensemble", "alpha_ens", config.ensemble.alpha_ens);
        read(s, "ensemble", "normalize_inputs", config.ensemble.normalize_inputs);
        read(s, "ensemble", "grid", config.alpha_grid);
    }

    auto prefixed = [](const char* section, const ConfigError& e) {
        return ConfigError(std::string(section) + "." + e.field(), e.what());
    };
    try {
        config.filter.validate();
    } catch (const ConfigError& e) {
        throw prefixed("filter", e);
    }
    try {
        config.head.validate();
    } catch (const ConfigError& e) {
        throw prefixed("head", e);
    }
    try {
        config.knn.validate();
    } catch (const ConfigError& e) {
        throw prefixed("knn", e);
    }
    try {
        config.ensemble.validate();
    } catch (const ConfigError& e) {
        throw prefixed("ensemble", e);
    }
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config", "cannot open " + path);
    }
    std::stringstream text;
    text << in.rdbuf();
    return run_config_from_json(text.str());
}

std::string run_config_to_json(const RunConfig& config) {
    ojson root;
    root["seed"] = config.seed;
    root["filter"] = {{"threshold", config.filter.threshold}, {"field", field_name(config.filter.field)}};
    const auto& h = config.head;
    root["head"] = {{"lr_fc", h.lr_fc},
                    {"lr_vision", h.lr_vision},
                    {"epochs", h.epochs},
                    {"batch_size", h.batch_size},
                    {"hidden_dim", h.hidden_dim},
                    {"train_adapter", h.train_adapter},
                    {"train_proj", h.train_proj},
                    {"freeze_alpha", h.freeze_alpha},
                    {"eps_ln", h.eps_ln}};
    const auto& k = config.knn;
    root["knn"] = {{"k", k.k},
                   {"distance_dim", k.distance_dim},
                   {"delta", k.delta},
                   {"coef", k.coef},
                   {"index_space", field_name(k.index_space)}};
    root["ensemble"] = {{"alpha_ens", config.ensemble.alpha_ens},
                        {"normalize_inputs", config.ensemble.normalize_inputs},
                        {"grid", config.alpha_grid}};
    return root.dump(2) + "\n";
}

} // namespace embedfuse::cli
