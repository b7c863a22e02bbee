#include "initlab/layers.hpp"

namespace initlab {

bool is_parameterized(const LayerSpec& spec) {
    return std::holds_alternative<ConvSpec>(spec) || std::holds_alternative<FullyConnectedSpec>(spec);
}

bool is_trainable(const LayerSpec& spec) {
    return is_parameterized(spec) || std::holds_alternative<BatchNormSpec>(spec);
}

const char* activation_kind_name(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::kRelu: return "relu";
        case ActivationKind::kVlrelu: return "vlrelu";
        case ActivationKind::kTanh: return "tanh";
        case ActivationKind::kSigmoid: return "sigmoid";
        case ActivationKind::kMaxout: return "maxout";
    }
    return "?";
}

std::string layer_kind_name(const LayerSpec& spec) {
    struct Visitor {
        std::string operator()(const ConvSpec&) const { return "conv"; }
        std::string operator()(const FullyConnectedSpec&) const { return "fc"; }
        std::string operator()(const PoolSpec&) const { return "pool"; }
        std::string operator()(const ActivationSpec& a) const { return activation_kind_name(a.kind); }
        std::string operator()(const BatchNormSpec&) const { return "bn"; }
        std::string operator()(const ResidualAddSpec&) const { return "sum"; }
    };
    return std::visit(Visitor{}, spec);
}

}  // namespace initlab
