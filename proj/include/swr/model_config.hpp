#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "swr/common.hpp"

namespace swr {

extern const std::vector<std::string> kModelKinds;

/// Architecture settings. Unused fields are ignored by build_model; parsing
/// rejects JSON keys that do not apply to the declared kind.
struct ModelConfig {
    std::string kind;
    size_t embed_dim = 16;
    std::vector<size_t> tower_dims = {256, 128, 64};

    // expert mixtures
    size_t experts = 4;                  // mmoe
    size_t expert_dim = 256;
    size_t shared_experts = 2;           // ple, sar_net
    size_t specific_experts = 1;         // ple
    size_t cgc_layers = 1;               // ple
    size_t n_experts_m3oe = 4;           // m3oe

    size_t bottom_dim = 256;             // shared_bottom
    size_t aux_dim = 16;                 // star auxiliary net width

    // m2m
    std::vector<size_t> meta_dims = {16};
    size_t ff_dim = 256;
    size_t enc_layers = 1;
    size_t dec_layers = 2;

    // adasparse
    double alpha = 1.0;
    double beta = 2.0;

    // adl
    size_t clusters = 4;
    double adl_momentum = 0.1;

    // epnet / ppnet
    size_t gate_hidden = 64;

    // hamur
    size_t hyper_hidden = 64;
    size_t hyper_matrix = 35;
};

bool is_model_kind(const std::string& kind);

/// Errors on unknown kind (listing the valid ones), on keys that do not
/// apply to the kind, and on non-positive dimensions.
ModelConfig parse_model_config(const std::string& json_text);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json model_config_to_json(const ModelConfig& c);

/// Structural validation shared by parsing and build_model.
void validate_model_config(const ModelConfig& c);

}  // namespace swr
