#include "a2/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace a2 {

void OptimizerConfig::validate() const {
    if (learning_rate < 0.0) throw std::invalid_argument("optimizer: learning_rate must be >= 0");
    if (weight_decay < 0.0) throw std::invalid_argument("optimizer: weight_decay must be >= 0");
    if (beta1 < 0.0 || beta1 >= 1.0) throw std::invalid_argument("optimizer: beta1 out of [0,1)");
    if (beta2 < 0.0 || beta2 >= 1.0) throw std::invalid_argument("optimizer: beta2 out of [0,1)");
}

Parameter& ParamStore::create(const std::string& name, Tensor init, bool learnable) {
    if (index_.count(name))
        throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    params_.push_back(std::make_unique<Parameter>(name, std::move(init), learnable));
    index_[name] = params_.size() - 1;
    return *params_.back();
}

Parameter& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
    return *params_[it->second];
}

const Parameter& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
    return *params_[it->second];
}

void ParamStore::zero_grad() {
    for (auto& p : params_)
        std::fill(p->grad.values.begin(), p->grad.values.end(), 0.0);
}

void ParamStore::adamw_step(const OptimizerConfig& cfg) {
    cfg.validate();
    ++step_;
    const double t = static_cast<double>(step_);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& p : params_) {
        if (!p->learnable) continue;
        const double lr = cfg.learning_rate * p->lr_scale;
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            const double g = p->grad.values[i];
            double& m = p->moment1.values[i];
            double& v = p->moment2.values[i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            double& w = p->value.values[i];
            // decoupled weight decay, applied on the pre-step weight
            const double decay = cfg.weight_decay > 0.0 ? lr * cfg.weight_decay * w : 0.0;
            const double step = mhat == 0.0 && vhat == 0.0
                                    ? 0.0
                                    : lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
            w -= step + decay;
        }
    }
}

std::vector<Tensor> ParamStore::snapshot_values() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->value);
    return out;
}

void ParamStore::restore_values(const std::vector<Tensor>& snap) {
    if (snap.size() != params_.size())
        throw std::invalid_argument("ParamStore: snapshot size mismatch");
    for (std::size_t i = 0; i < snap.size(); ++i) params_[i]->value = snap[i];
}

namespace {

constexpr char kMagic[8] = {'A', '2', 'C', 'K', 'P', 'T', '0', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
}

void write_tensor(std::ostream& os, const Tensor& t) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.values.data()),
             static_cast<std::streamsize>(t.values.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& is) {
    std::uint32_t ndim = 0;
    read_pod(is, ndim);
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) {
        std::uint64_t v = 0;
        read_pod(is, v);
        d = static_cast<std::size_t>(v);
    }
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
    return t;
}

}  // namespace

void ParamStore::save(const std::string& path, const std::string& meta) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kVersion);
    write_pod<std::uint64_t>(os, meta.size());
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    write_pod<std::int64_t>(os, step_);
    write_pod<std::uint64_t>(os, params_.size());
    for (const auto& p : params_) {
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_pod<std::uint8_t>(os, p->learnable ? 1 : 0);
        write_tensor(os, p->value);
        write_tensor(os, p->moment1);
        write_tensor(os, p->moment2);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::string ParamStore::load(const std::string& path, ParamStore& out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint32_t version = 0;
    read_pod(is, version);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    std::uint64_t meta_len = 0;
    read_pod(is, meta_len);
    std::string meta(meta_len, '\0');
    is.read(meta.data(), static_cast<std::streamsize>(meta_len));
    read_pod(is, out.step_);
    std::uint64_t count = 0;
    read_pod(is, count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t name_len = 0;
        read_pod(is, name_len);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        std::uint8_t learnable = 0;
        read_pod(is, learnable);
        Tensor value = read_tensor(is);
        Tensor m1 = read_tensor(is);
        Tensor m2 = read_tensor(is);
        Parameter& p = out.has(name) ? out.get(name)
                                     : out.create(name, Tensor(value.shape), learnable != 0);
        if (!p.value.same_shape(value))
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        p.value = std::move(value);
        p.moment1 = std::move(m1);
        p.moment2 = std::move(m2);
        p.learnable = learnable != 0;
    }
    return meta;
}

}  // namespace a2
