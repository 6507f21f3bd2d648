#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fasttcm/model.hpp"
#include "fasttcm/serialize.hpp"

namespace ftcm {

// Adam with per-group learning-rate factors. Groups with factor 0 are not
// touched at all, so their parameters stay bit-identical.
class Adam {
public:
    Adam() = default;

    Adam(std::vector<FastTcm::ParamGroup> groups, double base_lr, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8)
        : groups_(std::move(groups)), base_lr_(base_lr), beta1_(beta1), beta2_(beta2),
          eps_(eps) {
        for (const auto& g : groups_)
            for (const auto& [name, p] : g.params) {
                state_.push_back(Slot{std::vector<double>(p.size(), 0.0),
                                      std::vector<double>(p.size(), 0.0)});
            }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        size_t slot = 0;
        for (const auto& g : groups_) {
            const double lr = base_lr_ * g.lr_factor;
            for (const auto& [name, p] : g.params) {
                Slot& s = state_[slot++];
                if (lr == 0.0 || !p.has_grad()) continue;
                auto grad = p.grad();
                Tensor& param = const_cast<Tensor&>(p);
                for (size_t i = 0; i < param.size(); ++i) {
                    const double gv = grad[i];
                    s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * gv;
                    s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * gv * gv;
                    const double mhat = s.m[i] / bc1;
                    const double vhat = s.v[i] / bc2;
                    param.at(i) -= lr * mhat / (std::sqrt(vhat) + eps_);
                }
            }
        }
    }

    void zero_grad() {
        for (auto& g : groups_)
            for (auto& [name, p] : g.params) const_cast<Tensor&>(p).zero_grad();
    }

    size_t step_count() const { return t_; }

    NamedTensors state() const {
        NamedTensors out;
        out.emplace_back("adam.t", Tensor::scalar(static_cast<double>(t_)));
        size_t slot = 0;
        for (const auto& g : groups_)
            for (const auto& [name, p] : g.params) {
                const Slot& s = state_[slot++];
                out.emplace_back("adam.m." + name,
                                 Tensor::from_data(p.shape(), s.m));
                out.emplace_back("adam.v." + name,
                                 Tensor::from_data(p.shape(), s.v));
            }
        return out;
    }

    void load_state(const NamedTensors& records) {
        auto find = [&records](const std::string& name) -> const Tensor& {
            for (const auto& [n, t] : records)
                if (n == name) return t;
            throw IoError("missing optimizer record '" + name + "'");
        };
        t_ = static_cast<size_t>(find("adam.t").item());
        size_t slot = 0;
        for (const auto& g : groups_)
            for (const auto& [name, p] : g.params) {
                Slot& s = state_[slot++];
                const Tensor& m = find("adam.m." + name);
                const Tensor& v = find("adam.v." + name);
                if (m.size() != s.m.size() || v.size() != s.v.size())
                    throw ShapeError("optimizer state size mismatch for '" + name + "'");
                std::copy(m.values().begin(), m.values().end(), s.m.begin());
                std::copy(v.values().begin(), v.values().end(), s.v.begin());
            }
    }

private:
    struct Slot {
        std::vector<double> m, v;
    };

    std::vector<FastTcm::ParamGroup> groups_;
    double base_lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    size_t t_ = 0;
    std::vector<Slot> state_;
};

} // namespace ftcm
