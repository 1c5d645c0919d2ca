#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "swr/param_store.hpp"

namespace swr {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace ckpt {
constexpr char kMagic[4] = {'S', 'W', 'R', '1'};

template <class S>
const char* dtype_name() {
    if constexpr (std::is_same_v<S, float>) return "f32";
    else return "f64";
}
}  // namespace ckpt

/// Writes magic, a u64 manifest length, a UTF-8 JSON manifest
/// [{path, dtype, shape}], then each array's raw bytes in manifest order.
/// Non-trainable entries are included.
template <class S>
void save_checkpoint(const ParameterStore<S>& store, const std::string& file) {
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& e : store) {
        nlohmann::json item;
        item["path"] = e.path;
        item["dtype"] = ckpt::dtype_name<S>();
        item["shape"] = e.value.shape;
        manifest.push_back(std::move(item));
    }
    const std::string mtext = manifest.dump();
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot open checkpoint file for writing: ", file);
    out.write(ckpt::kMagic, 4);
    const uint64_t mlen = mtext.size();
    out.write(reinterpret_cast<const char*>(&mlen), 8);
    out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    for (const auto& e : store)
        out.write(reinterpret_cast<const char*>(e.value.values.data()),
                  static_cast<std::streamsize>(e.value.numel() * sizeof(S)));
    out.flush();
    require(out.good(), "write failure on checkpoint file: ", file);
}

/// Loads a checkpoint into an existing store. The manifest must carry exactly
/// the store's parameter set with matching shapes and dtype.
template <class S>
void load_checkpoint(ParameterStore<S>& store, const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    require(in.good(), "cannot open checkpoint file: ", file);
    char magic[4];
    in.read(magic, 4);
    require(in.good() && std::memcmp(magic, ckpt::kMagic, 4) == 0, "bad checkpoint magic in ", file);
    uint64_t mlen = 0;
    in.read(reinterpret_cast<char*>(&mlen), 8);
    require(in.good(), "truncated checkpoint header in ", file);
    std::string mtext(mlen, '\0');
    in.read(mtext.data(), static_cast<std::streamsize>(mlen));
    require(in.good(), "truncated checkpoint manifest in ", file);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mtext);
    } catch (const std::exception& e) {
        fail("unparseable checkpoint manifest in ", file, ": ", e.what());
    }
    require(manifest.is_array(), "checkpoint manifest must be a JSON array in ", file);
    require(manifest.size() == store.size(), "checkpoint holds ", manifest.size(), " arrays but model has ",
            store.size());
    std::vector<bool> seen(store.size(), false);
    for (const auto& item : manifest) {
        const std::string path = item.at("path").get<std::string>();
        const std::string dtype = item.at("dtype").get<std::string>();
        const auto shape = item.at("shape").get<std::vector<size_t>>();
        require(store.has(path), "checkpoint array '", path, "' has no matching model parameter");
        const size_t idx = store.index_of(path);
        require(!seen[idx], "duplicate checkpoint array '", path, "'");
        seen[idx] = true;
        auto& entry = store.entry(idx);
        require(dtype == ckpt::dtype_name<S>(), "checkpoint dtype ", dtype, " for '", path,
                "' does not match requested precision ", ckpt::dtype_name<S>());
        require(shape == entry.value.shape, "checkpoint shape ", shape_str(shape), " for '", path,
                "' does not match model shape ", shape_str(entry.value.shape));
        in.read(reinterpret_cast<char*>(entry.value.values.data()),
                static_cast<std::streamsize>(entry.value.numel() * sizeof(S)));
        require(in.good(), "truncated checkpoint data for '", path, "' in ", file);
    }
    in.peek();
    require(in.eof(), "trailing bytes after checkpoint data in ", file);
}

}  // namespace swr
