#include "bci/labels.hpp"

#include <string>

#include "bci/error.hpp"

namespace bci {

std::string_view to_string(ClassLabel c) noexcept {
    switch (c) {
        case ClassLabel::None: return "none";
        case ClassLabel::Left: return "left";
        case ClassLabel::Right: return "right";
        case ClassLabel::Both: return "both";
    }
    return "none";
}

ClassLabel parse_label(std::string_view name) {
    for (auto c : kAllLabels) {
        if (to_string(c) == name) return c;
    }
    raise(ErrorKind::InvalidArgument, "unknown class label '" + std::string(name) + "'");
}

}  // namespace bci
