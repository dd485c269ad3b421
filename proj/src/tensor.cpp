#include "vtp/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "vtp/error.hpp"

namespace vtp {

static size_t shape_product(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty())
        throw InvalidInput("tensor: shape must have at least one dimension");
    if (shape_product(shape_) != data_.size())
        throw InvalidInput("tensor: data length does not match shape product");
    for (float v : data_)
        if (!std::isfinite(v))
            throw InvalidInput("tensor: non-finite value rejected");
}

Tensor Tensor::zeros(std::vector<size_t> shape) {
    size_t n = shape_product(shape);
    return Tensor(std::move(shape), std::vector<float>(n, 0.0f));
}

static_assert(std::endian::native == std::endian::little,
              "tnsr interchange assumes a little-endian host");

void write_tnsr(const Tensor& t, const std::filesystem::path& path) {
    nlohmann::json header;
    header["dtype"] = "f32";
    header["byteorder"] = "little";
    header["shape"] = t.shape();
    header["schema_version"] = 1;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("tnsr: cannot open for writing: " + path.string());
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(t.data().data()),
              std::streamsize(t.size() * sizeof(float)));
    if (!out) throw std::runtime_error("tnsr: write failed: " + path.string());
}

Tensor read_tnsr(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("tnsr: cannot open: " + path.string());
    std::string header_line;
    if (!std::getline(in, header_line))
        throw InvalidInput("tnsr: missing header: " + path.string());
    nlohmann::json header = nlohmann::json::parse(header_line, nullptr, false);
    if (header.is_discarded() || header.value("dtype", "") != "f32" ||
        header.value("byteorder", "") != "little" || !header.contains("shape"))
        throw InvalidInput("tnsr: malformed header: " + path.string());
    std::vector<size_t> shape = header["shape"].get<std::vector<size_t>>();
    std::vector<float> data(shape_product(shape));
    in.read(reinterpret_cast<char*>(data.data()),
            std::streamsize(data.size() * sizeof(float)));
    if (size_t(in.gcount()) != data.size() * sizeof(float))
        throw InvalidInput("tnsr: truncated payload: " + path.string());
    return Tensor(std::move(shape), std::move(data));
}

static void flatten_json(const nlohmann::json& j, size_t depth,
                         std::vector<size_t>& shape, std::vector<float>& out) {
    if (j.is_array()) {
        if (depth == shape.size())
            shape.push_back(j.size());
        else if (shape[depth] != j.size())
            throw InvalidInput("tensor json: ragged nested arrays");
        for (const auto& child : j) flatten_json(child, depth + 1, shape, out);
    } else if (j.is_number()) {
        if (depth != shape.size())
            throw InvalidInput("tensor json: inconsistent nesting depth");
        out.push_back(j.get<float>());
    } else {
        throw InvalidInput("tensor json: expected numbers or arrays");
    }
}

Tensor tensor_from_json(const nlohmann::json& j) {
    std::vector<size_t> shape;
    std::vector<float> data;
    flatten_json(j, 0, shape, data);
    if (shape.empty()) throw InvalidInput("tensor json: scalar has no shape");
    return Tensor(std::move(shape), std::move(data));
}

static nlohmann::json nest_json(const Tensor& t, size_t axis, size_t& cursor) {
    nlohmann::json arr = nlohmann::json::array();
    if (axis + 1 == t.rank()) {
        for (size_t i = 0; i < t.dim(axis); ++i) arr.push_back(t.data()[cursor++]);
    } else {
        for (size_t i = 0; i < t.dim(axis); ++i) arr.push_back(nest_json(t, axis + 1, cursor));
    }
    return arr;
}

nlohmann::json tensor_to_json(const Tensor& t) {
    size_t cursor = 0;
    return nest_json(t, 0, cursor);
}

} // namespace vtp
