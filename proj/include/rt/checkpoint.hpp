#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "rt/errors.hpp"
#include "rt/params.hpp"
#include "rt/tensor.hpp"

namespace rt::ckpt {

// Archive layout: 8-byte magic, little-endian u64 header length, JSON header,
// then the raw tensor blob. The header records {format_version, meta,
// tensors:[{name, dtype, shape, offset, nbytes}]}; offsets are relative to the
// blob start. Tensors are written in sorted-name order so save -> load -> save
// is byte-identical.
inline constexpr char kMagic[8] = {'R', 'T', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr int kFormatVersion = 1;

template <class T>
struct Archive {
    std::map<std::string, Tensor<T>> tensors;
    nlohmann::json meta = nlohmann::json::object();  // free-form side data
};

template <class T>
void save_archive(const std::string& path, const Archive<T>& a);

// Throws ContractError on bad magic, truncation, or dtype mismatch.
template <class T>
Archive<T> load_archive(const std::string& path);

// Header-only read: shapes and metadata without touching the blob.
nlohmann::json read_header(const std::string& path);
std::map<std::string, Shape> read_shapes(const std::string& path);

// Loads an archive written with external parameter names. `name_map` maps
// external -> internal names; every entry of `expected` must be produced with
// the exact shape. Any problem (missing tensor, shape clash, leftover
// expectation) is collected into one ContractError report; nothing is
// returned partially.
template <class T>
std::map<std::string, Tensor<T>> import_external_checkpoint(
    const std::string& path, const std::map<std::string, std::string>& name_map,
    const std::map<std::string, Shape>& expected);

std::map<std::string, std::string> load_name_map(const std::string& json_path);

// ParamStore interop.
template <class T>
std::map<std::string, Tensor<T>> params_to_tensors(const ParamStore<T>& ps) {
    std::map<std::string, Tensor<T>> out;
    for (const auto& [name, var] : ps.map()) out.emplace(name, var->value);
    return out;
}

// Overwrites matching parameter values in place; every parameter must be
// present in `tensors` with the exact shape.
template <class T>
void tensors_into_params(ParamStore<T>& ps, const std::map<std::string, Tensor<T>>& tensors) {
    for (const auto& [name, var] : ps.map()) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ContractError("checkpoint missing parameter " + name);
        if (it->second.shape() != var->value.shape())
            throw ContractError("checkpoint shape mismatch for " + name + ": stored " +
                                shape_str(it->second.shape()) + " expected " +
                                shape_str(var->value.shape()));
        var->value = it->second;
    }
}

}  // namespace rt::ckpt
