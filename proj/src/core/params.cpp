#include "polydiff/core/params.hpp"

#include "polydiff/core/error.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>

namespace polydiff::core {

Tensor ParameterStore::add(std::string name, Shape shape, Init init, Rng& rng, double stddev) {
    if (index_.count(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
    Tensor t = Tensor::zeros(std::move(shape), true);
    auto values = t.mutable_data();
    switch (init) {
        case Init::Zeros: break;
        case Init::Ones: std::fill(values.begin(), values.end(), 1.0); break;
        case Init::Normal: {
            std::normal_distribution<double> dist(0.0, stddev);
            for (double& v : values) v = dist(rng);
            break;
        }
    }
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), t});
    return t;
}

const Tensor& ParameterStore::at(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError("unknown parameter '" + std::string(name) + "'");
    return entries_[it->second].tensor;
}

Tensor& ParameterStore::at(std::string_view name) {
    return const_cast<Tensor&>(std::as_const(*this).at(name));
}

bool ParameterStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

Index ParameterStore::scalar_count() const {
    Index n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

void ParameterStore::randomize(Rng& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& e : entries_)
        for (double& v : e.tensor.mutable_data()) v = dist(rng);
}

bool ParameterStore::all_finite() const {
    for (const auto& e : entries_)
        for (double v : e.tensor.data())
            if (!std::isfinite(v)) return false;
    return true;
}

namespace {

void write_f32_le(std::ostream& os, float f) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    unsigned char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
    os.write(reinterpret_cast<const char*>(bytes), 4);
}

float read_f32_le(const unsigned char* bytes) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    return std::bit_cast<float>(bits);
}

Shape parse_shape(const std::string& text) {
    Shape shape;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        try {
            shape.push_back(std::stoll(part));
        } catch (const std::exception&) {
            throw ParseError("bad shape '" + text + "' in parameter manifest");
        }
    }
    return shape;
}

}  // namespace

void save_parameters(const ParameterStore& store, const std::filesystem::path& binary,
                     const std::filesystem::path& manifest) {
    std::ofstream bin(binary, std::ios::binary);
    std::ofstream man(manifest);
    if (!bin || !man) throw DataError("cannot write parameters to " + binary.string());
    std::uint64_t offset = 0;
    for (const auto& e : store) {
        man << e.name << ' ' << to_string(e.tensor.shape()) << ' ' << offset << '\n';
        for (double v : e.tensor.data()) write_f32_le(bin, static_cast<float>(v));
        offset += 4u * static_cast<std::uint64_t>(e.tensor.size());
    }
    if (!bin || !man) throw DataError("short write to " + binary.string());
}

void load_parameters(ParameterStore& store, const std::filesystem::path& binary,
                     const std::filesystem::path& manifest) {
    std::ifstream man(manifest);
    if (!man) throw DataError("cannot open parameter manifest " + manifest.string());
    std::ifstream bin(binary, std::ios::binary);
    if (!bin) throw DataError("cannot open parameter file " + binary.string());
    std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

    std::string line;
    long lineno = 0;
    std::size_t matched = 0;
    while (std::getline(man, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string name, shape_text;
        std::uint64_t offset = 0;
        if (!(ls >> name >> shape_text >> offset)) throw ParseError("malformed manifest entry", lineno);
        if (!store.contains(name))
            throw DimensionError("checkpoint parameter '" + name + "' is not part of this model");
        Tensor& t = store.at(name);
        Shape shape = parse_shape(shape_text);
        if (shape != t.shape())
            throw DimensionError("shape mismatch for '" + name + "': checkpoint [" + shape_text +
                                 "] vs model [" + to_string(t.shape()) + "]");
        const std::uint64_t bytes = 4u * static_cast<std::uint64_t>(t.size());
        if (offset + bytes > blob.size())
            throw ParseError("parameter '" + name + "' extends past end of " + binary.string(), lineno);
        auto values = t.mutable_data();
        for (Index i = 0; i < t.size(); ++i) values[i] = read_f32_le(blob.data() + offset + 4 * i);
        ++matched;
    }
    if (matched != store.size())
        throw DimensionError("checkpoint provides " + std::to_string(matched) + " of " +
                             std::to_string(store.size()) + " model parameters");
}

}  // namespace polydiff::core
