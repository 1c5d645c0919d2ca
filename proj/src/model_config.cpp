#include "swr/model_config.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace swr {

using nlohmann::json;

const std::vector<std::string> kModelKinds = {"single_tower", "shared_bottom", "mmoe", "ple",
                                              "star",         "sar_net",       "m2m",  "adasparse",
                                              "adl",          "epnet",         "ppnet", "hamur",
                                              "m3oe"};

bool is_model_kind(const std::string& kind) {
    return std::find(kModelKinds.begin(), kModelKinds.end(), kind) != kModelKinds.end();
}

namespace {

// keys every kind accepts, and the kinds each specific key applies to
const std::set<std::string> kCommonKeys = {"kind", "embed_dim", "tower_dims"};

const std::map<std::string, std::set<std::string>> kKeyKinds = {
    {"experts", {"mmoe"}},
    {"expert_dim", {"mmoe", "ple", "sar_net", "m3oe"}},
    {"shared_experts", {"ple", "sar_net"}},
    {"specific_experts", {"ple"}},
    {"cgc_layers", {"ple"}},
    {"n_experts_m3oe", {"m3oe"}},
    {"bottom_dim", {"shared_bottom"}},
    {"aux_dim", {"star"}},
    {"meta_dims", {"m2m"}},
    {"ff_dim", {"m2m"}},
    {"enc_layers", {"m2m"}},
    {"dec_layers", {"m2m"}},
    {"alpha", {"adasparse"}},
    {"beta", {"adasparse"}},
    {"clusters", {"adl"}},
    {"adl_momentum", {"adl"}},
    {"gate_hidden", {"epnet", "ppnet"}},
    {"hyper_hidden", {"hamur"}},
    {"hyper_matrix", {"hamur"}},
};

std::string kind_list() {
    std::string out;
    for (const auto& k : kModelKinds) {
        if (!out.empty()) out += ", ";
        out += k;
    }
    return out;
}

size_t positive(const json& j, const char* key) {
    require(j.is_number_integer() && j.get<int64_t>() > 0, "model config field '", key,
            "' must be a positive integer");
    return j.get<size_t>();
}

}  // namespace

void validate_model_config(const ModelConfig& c) {
    require(is_model_kind(c.kind), "unknown model kind '", c.kind, "' (valid kinds: ", kind_list(), ")");
    require(c.embed_dim > 0, "model kind '", c.kind, "' requires positive 'embed_dim'");
    require(!c.tower_dims.empty(), "model kind '", c.kind, "' requires non-empty 'tower_dims'");
    for (size_t d : c.tower_dims) require(d > 0, "model kind '", c.kind, "' has a zero tower dimension");
    auto need = [&](bool used, size_t v, const char* name) {
        if (used) require(v > 0, "model kind '", c.kind, "' requires positive '", name, "'");
    };
    need(c.kind == "mmoe", c.experts, "experts");
    need(c.kind == "mmoe" || c.kind == "ple" || c.kind == "sar_net" || c.kind == "m3oe", c.expert_dim,
         "expert_dim");
    need(c.kind == "ple" || c.kind == "sar_net", c.shared_experts, "shared_experts");
    need(c.kind == "ple", c.specific_experts, "specific_experts");
    need(c.kind == "m3oe", c.n_experts_m3oe, "n_experts_m3oe");
    need(c.kind == "shared_bottom", c.bottom_dim, "bottom_dim");
    need(c.kind == "star", c.aux_dim, "aux_dim");
    need(c.kind == "m2m", c.ff_dim, "ff_dim");
    need(c.kind == "m2m", c.enc_layers, "enc_layers");
    need(c.kind == "m2m", c.dec_layers, "dec_layers");
    need(c.kind == "adl", c.clusters, "clusters");
    need(c.kind == "epnet" || c.kind == "ppnet", c.gate_hidden, "gate_hidden");
    need(c.kind == "hamur", c.hyper_hidden, "hyper_hidden");
    need(c.kind == "hamur", c.hyper_matrix, "hyper_matrix");
    if (c.kind == "ple")
        require(c.cgc_layers == 1 || c.cgc_layers == 2, "model kind 'ple' requires cgc_layers 1 or 2");
    if (c.kind == "m2m") {
        require(!c.meta_dims.empty(), "model kind 'm2m' requires non-empty 'meta_dims'");
        for (size_t d : c.meta_dims) require(d > 0, "model kind 'm2m' has a zero meta dimension");
    }
    if (c.kind == "adasparse") {
        require(c.alpha > 0.0, "model kind 'adasparse' requires alpha > 0");
        require(c.beta >= 1.0, "model kind 'adasparse' requires beta >= 1");
    }
    if (c.kind == "adl") {
        require(c.clusters >= 2, "model kind 'adl' requires clusters >= 2");
        require(c.adl_momentum > 0.0 && c.adl_momentum <= 1.0, "model kind 'adl' requires adl_momentum in (0,1]");
    }
}

ModelConfig model_config_from_json(const json& j) {
    require(j.is_object(), "model config must be a JSON object");
    require(j.contains("kind") && j["kind"].is_string(), "model config missing string field 'kind'");
    ModelConfig c;
    c.kind = j["kind"].get<std::string>();
    require(is_model_kind(c.kind), "unknown model kind '", c.kind, "' (valid kinds: ", kind_list(), ")");

    for (const auto& [key, val] : j.items()) {
        if (kCommonKeys.count(key)) continue;
        const auto it = kKeyKinds.find(key);
        require(it != kKeyKinds.end(), "unknown model config field '", key, "'");
        require(it->second.count(c.kind), "model config field '", key, "' does not apply to kind '", c.kind,
                "'");
        (void)val;
    }

    if (j.contains("embed_dim")) c.embed_dim = positive(j["embed_dim"], "embed_dim");
    if (j.contains("tower_dims")) {
        require(j["tower_dims"].is_array() && !j["tower_dims"].empty(), "'tower_dims' must be a non-empty array");
        c.tower_dims.clear();
        for (const auto& d : j["tower_dims"]) c.tower_dims.push_back(positive(d, "tower_dims"));
    }
    if (j.contains("experts")) c.experts = positive(j["experts"], "experts");
    if (j.contains("expert_dim")) c.expert_dim = positive(j["expert_dim"], "expert_dim");
    if (j.contains("shared_experts")) c.shared_experts = positive(j["shared_experts"], "shared_experts");
    if (j.contains("specific_experts")) c.specific_experts = positive(j["specific_experts"], "specific_experts");
    if (j.contains("cgc_layers")) c.cgc_layers = positive(j["cgc_layers"], "cgc_layers");
    if (j.contains("n_experts_m3oe")) c.n_experts_m3oe = positive(j["n_experts_m3oe"], "n_experts_m3oe");
    if (j.contains("bottom_dim")) c.bottom_dim = positive(j["bottom_dim"], "bottom_dim");
    if (j.contains("aux_dim")) c.aux_dim = positive(j["aux_dim"], "aux_dim");
    if (j.contains("meta_dims")) {
        require(j["meta_dims"].is_array() && !j["meta_dims"].empty(), "'meta_dims' must be a non-empty array");
        c.meta_dims.clear();
        for (const auto& d : j["meta_dims"]) c.meta_dims.push_back(positive(d, "meta_dims"));
    }
    if (j.contains("ff_dim")) c.ff_dim = positive(j["ff_dim"], "ff_dim");
    if (j.contains("enc_layers")) c.enc_layers = positive(j["enc_layers"], "enc_layers");
    if (j.contains("dec_layers")) c.dec_layers = positive(j["dec_layers"], "dec_layers");
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("beta")) c.beta = j["beta"].get<double>();
    if (j.contains("clusters")) c.clusters = positive(j["clusters"], "clusters");
    if (j.contains("adl_momentum")) c.adl_momentum = j["adl_momentum"].get<double>();
    if (j.contains("gate_hidden")) c.gate_hidden = positive(j["gate_hidden"], "gate_hidden");
    if (j.contains("hyper_hidden")) c.hyper_hidden = positive(j["hyper_hidden"], "hyper_hidden");
    if (j.contains("hyper_matrix")) c.hyper_matrix = positive(j["hyper_matrix"], "hyper_matrix");

    validate_model_config(c);
    return c;
}

ModelConfig parse_model_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        fail("model config is not valid JSON: ", e.what());
    }
    return model_config_from_json(j);
}

json model_config_to_json(const ModelConfig& c) {
    json j;
    j["kind"] = c.kind;
    j["embed_dim"] = c.embed_dim;
    j["tower_dims"] = c.tower_dims;
    auto put = [&](bool used, const char* key, auto v) {
        if (used) j[key] = v;
    };
    put(c.kind == "mmoe", "experts", c.experts);
    put(c.kind == "mmoe" || c.kind == "ple" || c.kind == "sar_net" || c.kind == "m3oe", "expert_dim",
        c.expert_dim);
    put(c.kind == "ple" || c.kind == "sar_net", "shared_experts", c.shared_experts);
    put(c.kind == "ple", "specific_experts", c.specific_experts);
    put(c.kind == "ple", "cgc_layers", c.cgc_layers);
    put(c.kind == "m3oe", "n_experts_m3oe", c.n_experts_m3oe);
    put(c.kind == "shared_bottom", "bottom_dim", c.bottom_dim);
    put(c.kind == "star", "aux_dim", c.aux_dim);
    put(c.kind == "m2m", "meta_dims", c.meta_dims);
    put(c.kind == "m2m", "ff_dim", c.ff_dim);
    put(c.kind == "m2m", "enc_layers", c.enc_layers);
    put(c.kind == "m2m", "dec_layers", c.dec_layers);
    put(c.kind == "adasparse", "alpha", c.alpha);
    put(c.kind == "adasparse", "beta", c.beta);
    put(c.kind == "adl", "clusters", c.clusters);
    put(c.kind == "adl", "adl_momentum", c.adl_momentum);
    put(c.kind == "epnet" || c.kind == "ppnet", "gate_hidden", c.gate_hidden);
    put(c.kind == "hamur", "hyper_hidden", c.hyper_hidden);
    put(c.kind == "hamur", "hyper_matrix", c.hyper_matrix);
    return j;
}

}  // namespace swr
