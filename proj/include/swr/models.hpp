#pragma once

#include <memory>

#include "swr/models/adasparse.hpp"
#include "swr/models/adl.hpp"
#include "swr/models/epnet.hpp"
#include "swr/models/hamur.hpp"
#include "swr/models/m2m.hpp"
#include "swr/models/m3oe.hpp"
#include "swr/models/mmoe.hpp"
#include "swr/models/ple.hpp"
#include "swr/models/ppnet.hpp"
#include "swr/models/sar_net.hpp"
#include "swr/models/shared_bottom.hpp"
#include "swr/models/single_tower.hpp"
#include "swr/models/star.hpp"

namespace swr {

template <class S>
std::unique_ptr<Model<S>> build_model(const ModelConfig& cfg, const FeatureSpace& space, uint64_t seed) {
    validate_model_config(cfg);
    if (cfg.kind == "single_tower") return std::make_unique<SingleTowerModel<S>>(cfg, space, seed);
    if (cfg.kind == "shared_bottom") return std::make_unique<SharedBottomModel<S>>(cfg, space, seed);
    if (cfg.kind == "mmoe") return std::make_unique<MmoeModel<S>>(cfg, space, seed);
    if (cfg.kind == "ple") return std::make_unique<PleModel<S>>(cfg, space, seed);
    if (cfg.kind == "star") return std::make_unique<StarModel<S>>(cfg, space, seed);
    if (cfg.kind == "sar_net") return std::make_unique<SarNetModel<S>>(cfg, space, seed);
    if (cfg.kind == "m2m") return std::make_unique<M2mModel<S>>(cfg, space, seed);
    if (cfg.kind == "adasparse") return std::make_unique<AdaSparseModel<S>>(cfg, space, seed);
    if (cfg.kind == "adl") return std::make_unique<AdlModel<S>>(cfg, space, seed);
    if (cfg.kind == "epnet") return std::make_unique<EpNetModel<S>>(cfg, space, seed);
    if (cfg.kind == "ppnet") return std::make_unique<PpNetModel<S>>(cfg, space, seed);
    if (cfg.kind == "hamur") return std::make_unique<HamurModel<S>>(cfg, space, seed);
    if (cfg.kind == "m3oe") return std::make_unique<M3oeModel<S>>(cfg, space, seed);
    fail("unknown model kind '", cfg.kind, "'");
}

}  // namespace swr
