#include "ctes/params.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctes {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
    if (entries_.count(name)) throw std::runtime_error("duplicate parameter '" + name + "'");
    Entry e;
    e.grad = Tensor(init.rows, init.cols);
    e.m = Tensor(init.rows, init.cols);
    e.v = Tensor(init.rows, init.cols);
    e.value = std::move(init);
    auto [it, ok] = entries_.emplace(name, std::move(e));
    (void)ok;
    return it->second.value;
}

Tensor& ParamStore::add_uniform(const std::string& name, int rows, int cols, int fan_in,
                                RandomStream& rng) {
    Tensor t(rows, cols);
    double b = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
    for (double& x : t.v) x = (2.0 * rng.uniform() - 1.0) * b;
    return add(name, std::move(t));
}

Tensor& ParamStore::value(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::runtime_error("unknown parameter '" + name + "'");
    return it->second.value;
}

const Tensor& ParamStore::value(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::runtime_error("unknown parameter '" + name + "'");
    return it->second.value;
}

Tensor& ParamStore::grad(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::runtime_error("unknown parameter '" + name + "'");
    return it->second.grad;
}

void ParamStore::zero_grads() {
    for (auto& [name, e] : entries_)
        std::fill(e.grad.v.begin(), e.grad.v.end(), 0.0);
}

bool ParamStore::is_frozen(const std::string& name) const {
    for (const auto& p : frozen_)
        if (name.rfind(p, 0) == 0) return true;
    return false;
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
    ++step_;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    for (auto& [name, e] : entries_) {
        if (is_frozen(name)) continue;
        for (int i = 0; i < e.value.size(); ++i) {
            double g = e.grad.v[i];
            if (!std::isfinite(g))
                throw std::runtime_error("non-finite gradient in parameter '" + name + "'");
            e.m.v[i] = beta1 * e.m.v[i] + (1.0 - beta1) * g;
            e.v.v[i] = beta2 * e.v.v[i] + (1.0 - beta2) * g * g;
            double mhat = e.m.v[i] / bc1;
            double vhat = e.v.v[i] / bc2;
            e.value.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    zero_grads();
}

void ParamStore::reset_optimizer() {
    step_ = 0;
    for (auto& [name, e] : entries_) {
        std::fill(e.m.v.begin(), e.m.v.end(), 0.0);
        std::fill(e.v.v.begin(), e.v.v.end(), 0.0);
    }
}

void ParamStore::remove(const std::string& name) {
    if (!entries_.erase(name)) throw std::runtime_error("unknown parameter '" + name + "'");
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

std::size_t ParamStore::num_scalars() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
}

static const char kMagic[] = "CTESCKPT 1";

void ParamStore::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    out << kMagic << "\n" << entries_.size() << "\n";
    char buf[32];
    for (const auto& [name, e] : entries_) {
        out << name << " " << e.value.rows << " " << e.value.cols << "\n";
        for (int i = 0; i < e.value.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", e.value.v[i]);
            out << buf << (i + 1 == e.value.size() ? "" : " ");
        }
        out << "\n";
    }
}

void ParamStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    std::string magic;
    std::getline(in, magic);
    if (magic != kMagic) throw std::runtime_error("bad checkpoint magic in '" + path + "'");
    std::size_t n;
    in >> n;
    for (std::size_t k = 0; k < n; ++k) {
        std::string name;
        int rows, cols;
        if (!(in >> name >> rows >> cols))
            throw std::runtime_error("truncated checkpoint '" + path + "'");
        auto it = entries_.find(name);
        if (it == entries_.end())
            throw std::runtime_error("checkpoint parameter '" + name + "' not in model");
        Tensor& t = it->second.value;
        if (t.rows != rows || t.cols != cols)
            throw std::runtime_error("checkpoint shape mismatch for '" + name + "': file " +
                                     std::to_string(rows) + "x" + std::to_string(cols) +
                                     " vs model " + t.shape_str());
        for (int i = 0; i < t.size(); ++i)
            if (!(in >> t.v[i]))
                throw std::runtime_error("truncated checkpoint '" + path + "'");
    }
    if (n != entries_.size())
        throw std::runtime_error("checkpoint has " + std::to_string(n) +
                                 " parameters, model has " + std::to_string(entries_.size()));
}

}  // namespace ctes
