#pragma once

#include <cassert>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

namespace vtp {

/// Dense row-major float32 tensor. Construction rejects NaN/Inf and
/// shape/data length mismatches.
class Tensor {
  public:
    Tensor() = default;
    Tensor(std::vector<size_t> shape, std::vector<float> data);

    static Tensor zeros(std::vector<size_t> shape);

    const std::vector<size_t>& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t size() const { return data_.size(); }
    size_t dim(size_t axis) const {
        assert(axis < shape_.size());
        return shape_[axis];
    }

    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }

    template <typename... Ix>
    float operator()(Ix... ix) const {
        return data_[offset(ix...)];
    }
    template <typename... Ix>
    float& operator()(Ix... ix) {
        return data_[offset(ix...)];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  private:
    template <typename... Ix>
    size_t offset(Ix... ix) const {
        static_assert(sizeof...(Ix) > 0);
        assert(sizeof...(Ix) == shape_.size());
        const size_t idx[] = {static_cast<size_t>(ix)...};
        size_t off = 0;
        for (size_t a = 0; a < sizeof...(Ix); ++a) {
            assert(idx[a] < shape_[a]);
            off = off * shape_[a] + idx[a];
        }
        return off;
    }

    std::vector<size_t> shape_;
    std::vector<float> data_;
};

/// Binary interchange: one-line JSON header (shape, dtype, byte order),
/// newline, then raw little-endian row-major floats. Extension `.tnsr`.
void write_tnsr(const Tensor& t, const std::filesystem::path& path);
Tensor read_tnsr(const std::filesystem::path& path);

/// Pure-JSON nested-array form for tiny fixtures; shape is inferred from
/// the nesting and must be rectangular.
nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

} // namespace vtp
