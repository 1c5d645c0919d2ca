#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "swr/features.hpp"

namespace swr {

enum class RawFormat { movielens_1m, delimited, jsonl };

enum class LabelRule { threshold, binary };

enum class SplitMode { ratio_811, predefined_folds };

/// Parsed dataset manifest. Raw column values are treated as strings until
/// the label/dense columns are interpreted.
struct DatasetManifest {
    std::string name;
    RawFormat format = RawFormat::delimited;
    std::vector<FeatureSpec> features;          // exactly one kind == scenario
    std::string scenario_feature;
    std::map<std::string, int32_t> scenario_map;  // raw value -> contiguous id
    size_t n_scenarios = 0;

    LabelRule label_rule = LabelRule::binary;
    std::string label_column;
    double label_threshold = 0.0;               // rule == threshold: value > threshold -> 1

    SplitMode split_mode = SplitMode::ratio_811;
    std::string fold_column;                    // predefined_folds
    std::vector<std::string> fold_order;        // raw fold values in train/val/test order

    // delimited/jsonl: file relative to the raw root
    std::string file;
    char delimiter = ',';
    bool has_header = true;
    std::vector<std::string> columns;           // required when has_header == false

    // optional identity columns for per-scenario user/item stats
    std::string user_feature, item_feature;

    const FeatureSpec& feature(const std::string& fname) const;
};

DatasetManifest parse_manifest(const std::string& json_text);
DatasetManifest load_manifest(const std::string& path);

}  // namespace swr
