#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctes/rng.hpp"
#include "ctes/tensor.hpp"

namespace ctes {

// Named parameter tensors with gradient accumulators and Adam state.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor init);
    bool has(const std::string& name) const { return entries_.count(name) > 0; }

    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    Tensor& grad(const std::string& name);

    void zero_grads();

    // Standard Adam with bias correction; gradients are zeroed afterward.
    // Throws on non-finite gradients. Parameters whose name starts with a
    // frozen prefix are skipped entirely.
    void adam_step(double lr, double beta1, double beta2, double eps);

    void set_frozen(std::vector<std::string> prefixes) { frozen_ = std::move(prefixes); }
    const std::vector<std::string>& frozen() const { return frozen_; }
    bool is_frozen(const std::string& name) const;

    void reset_optimizer();
    void remove(const std::string& name);

    std::vector<std::string> names() const;
    std::size_t num_scalars() const;

    void save(const std::string& path) const;
    void load(const std::string& path);  // shapes must match existing entries

    // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init
    Tensor& add_uniform(const std::string& name, int rows, int cols, int fan_in,
                        RandomStream& rng);

private:
    struct Entry {
        Tensor value, grad, m, v;
    };
    std::map<std::string, Entry> entries_;
    std::vector<std::string> frozen_;
    long step_ = 0;
};

}  // namespace ctes
