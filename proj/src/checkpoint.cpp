#include "rt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace rt::ckpt {

namespace {

using nlohmann::json;

template <class T>
const char* dtype_name();
template <>
const char* dtype_name<float>() {
    return "f32";
}
template <>
const char* dtype_name<double>() {
    return "f64";
}

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

json open_header(std::ifstream& in, const std::string& path) {
    if (!in) throw ContractError("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw ContractError(path + " is not a checkpoint archive (bad magic)");
    uint64_t hlen = read_u64(in);
    if (!in || hlen > (1ull << 30)) throw ContractError(path + ": corrupt header length");
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw ContractError(path + ": truncated header");
    json h = json::parse(hs, nullptr, false);
    if (h.is_discarded() || !h.contains("tensors"))
        throw ContractError(path + ": malformed header JSON");
    if (h.value("format_version", 0) != kFormatVersion)
        throw ContractError(path + ": unsupported format version");
    return h;
}

}  // namespace

template <class T>
void save_archive(const std::string& path, const Archive<T>& a) {
    json header;
    header["format_version"] = kFormatVersion;
    header["meta"] = a.meta.is_null() ? json::object() : a.meta;
    json tensors = json::array();
    uint64_t offset = 0;
    for (const auto& [name, t] : a.tensors) {
        uint64_t nbytes = static_cast<uint64_t>(t.numel()) * sizeof(T);
        tensors.push_back({{"name", name},
                           {"dtype", dtype_name<T>()},
                           {"shape", t.shape()},
                           {"offset", offset},
                           {"nbytes", nbytes}});
        offset += nbytes;
    }
    header["tensors"] = std::move(tensors);
    std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ContractError("cannot write checkpoint " + path);
    out.write(kMagic, 8);
    write_u64(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : a.tensors)
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.numel() * sizeof(T)));
    if (!out) throw ContractError("write failed for checkpoint " + path);
}

template <class T>
Archive<T> load_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    json h = open_header(in, path);
    std::streampos blob_start = in.tellg();

    Archive<T> a;
    a.meta = h.value("meta", json::object());
    for (const auto& e : h["tensors"]) {
        std::string name = e.at("name");
        std::string dtype = e.at("dtype");
        if (dtype != dtype_name<T>())
            throw ContractError(path + ": tensor " + name + " has dtype " + dtype +
                                ", expected " + dtype_name<T>());
        Shape shape = e.at("shape").get<Shape>();
        uint64_t offset = e.at("offset");
        uint64_t nbytes = e.at("nbytes");
        if (nbytes != static_cast<uint64_t>(numel_of(shape)) * sizeof(T))
            throw ContractError(path + ": tensor " + name + " byte count disagrees with shape");
        Tensor<T> t(shape);
        in.seekg(blob_start + static_cast<std::streamoff>(offset));
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(nbytes));
        if (!in) throw ContractError(path + ": truncated blob reading " + name);
        a.tensors.emplace(std::move(name), std::move(t));
    }
    return a;
}

nlohmann::json read_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return open_header(in, path);
}

std::map<std::string, Shape> read_shapes(const std::string& path) {
    std::map<std::string, Shape> out;
    json h = read_header(path);
    for (const auto& e : h["tensors"]) out[e.at("name")] = e.at("shape").get<Shape>();
    return out;
}

template <class T>
std::map<std::string, Tensor<T>> import_external_checkpoint(
    const std::string& path, const std::map<std::string, std::string>& name_map,
    const std::map<std::string, Shape>& expected) {
    Archive<T> a = load_archive<T>(path);
    std::map<std::string, Tensor<T>> out;
    std::ostringstream report;
    int problems = 0;
    auto complain = [&](const std::string& line) {
        report << "  " << line << "\n";
        ++problems;
    };

    for (const auto& [ext, internal] : name_map) {
        auto it = a.tensors.find(ext);
        if (it == a.tensors.end()) {
            complain("missing external tensor '" + ext + "' (for " + internal + ")");
            continue;
        }
        auto want = expected.find(internal);
        if (want == expected.end()) {
            complain("map target '" + internal + "' is not an expected parameter");
            continue;
        }
        if (it->second.shape() != want->second) {
            complain("shape mismatch for " + internal + ": external " +
                     shape_str(it->second.shape()) + " expected " + shape_str(want->second));
            continue;
        }
        out.emplace(internal, it->second);
    }
    std::map<std::string, int> targeted;
    for (const auto& [ext, internal] : name_map) targeted[internal]++;
    for (const auto& [internal, shape] : expected) {
        if (!targeted.count(internal))
            complain("no mapping produced parameter '" + internal + "'");
        else if (targeted[internal] > 1)
            complain("multiple external tensors map to '" + internal + "'");
    }

    if (problems)
        throw ContractError("external checkpoint import failed (" + std::to_string(problems) +
                            " problem(s)):\n" + report.str());
    return out;
}

std::map<std::string, std::string> load_name_map(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw ContractError("cannot open name map " + json_path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ContractError(json_path + " is not a JSON object of external->internal names");
    std::map<std::string, std::string> out;
    for (auto& [k, v] : j.items()) out[k] = v.get<std::string>();
    return out;
}

template void save_archive<float>(const std::string&, const Archive<float>&);
template void save_archive<double>(const std::string&, const Archive<double>&);
template Archive<float> load_archive<float>(const std::string&);
template Archive<double> load_archive<double>(const std::string&);
template std::map<std::string, Tensor<float>> import_external_checkpoint<float>(
    const std::string&, const std::map<std::string, std::string>&,
    const std::map<std::string, Shape>&);
template std::map<std::string, Tensor<double>> import_external_checkpoint<double>(
    const std::string&, const std::map<std::string, std::string>&,
    const std::map<std::string, Shape>&);

}  // namespace rt::ckpt
