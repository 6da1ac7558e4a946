#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rt {

using Shape = std::vector<int>;

inline int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Dense row-major tensor. Rank is dynamic, data is always contiguous.
template <class T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(numel_of(shape_), T(0)) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<int64_t>(data_.size()) != numel_of(shape_))
            throw std::invalid_argument("tensor data size does not match shape " + shape_str(shape_));
    }

    static Tensor full(Shape shape, T v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }
    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor scalar(T v) { return full({1}, v); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 4-D accessor, the common case for image batches (b, c, h, w).
    T& at4(int b, int c, int h, int w) {
        return data_[((static_cast<int64_t>(b) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    const T& at4(int b, int c, int h, int w) const {
        return const_cast<Tensor*>(this)->at4(b, c, h, w);
    }
    T& at2(int r, int c) { return data_[static_cast<int64_t>(r) * shape_[1] + c]; }
    const T& at2(int r, int c) const { return const_cast<Tensor*>(this)->at2(r, c); }

    Tensor reshaped(Shape s) const {
        if (numel_of(s) != numel())
            throw std::invalid_argument("reshape " + shape_str(shape_) + " -> " + shape_str(s));
        Tensor t = *this;
        t.shape_ = std::move(s);
        return t;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out;
        std::vector<U> d(data_.size());
        for (size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<U>(data_[i]);
        out = Tensor<U>(shape_, std::move(d));
        return out;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    Shape shape_;
    std::vector<T> data_;
};

}  // namespace rt
