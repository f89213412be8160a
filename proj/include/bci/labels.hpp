#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace bci {

// Encoding is part of the session and model file formats; do not reorder.
enum class ClassLabel : std::uint8_t { None = 0, Left = 1, Right = 2, Both = 3 };

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::array<ClassLabel, kNumClasses> kAllLabels = {
    ClassLabel::None, ClassLabel::Left, ClassLabel::Right, ClassLabel::Both};

constexpr std::size_t index_of(ClassLabel c) noexcept { return static_cast<std::size_t>(c); }

constexpr ClassLabel label_from_index(std::size_t i) noexcept {
    return static_cast<ClassLabel>(static_cast<std::uint8_t>(i & 3u));
}

constexpr ClassLabel label_from_keys(bool left_down, bool right_down) noexcept {
    if (left_down && right_down) return ClassLabel::Both;
    if (left_down) return ClassLabel::Left;
    if (right_down) return ClassLabel::Right;
    return ClassLabel::None;
}

constexpr bool includes_left(ClassLabel c) noexcept {
    return c == ClassLabel::Left || c == ClassLabel::Both;
}
constexpr bool includes_right(ClassLabel c) noexcept {
    return c == ClassLabel::Right || c == ClassLabel::Both;
}

std::string_view to_string(ClassLabel c) noexcept;
// Throws Error(InvalidArgument) on an unknown name.
ClassLabel parse_label(std::string_view name);

}  // namespace bci
