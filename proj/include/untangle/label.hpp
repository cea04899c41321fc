#pragma once

#include <optional>
#include <string_view>

namespace untangle {

enum class Label { Buggy, NotBuggy, Unparseable };

std::string_view to_string(Label label) noexcept;

// Accepts "Buggy" / "NotBuggy" / "Unparseable" (case-insensitive).
std::optional<Label> parse_label(std::string_view text) noexcept;

inline Label invert(Label label) noexcept {
    switch (label) {
        case Label::Buggy: return Label::NotBuggy;
        case Label::NotBuggy: return Label::Buggy;
        default: return label;
    }
}

}  // namespace untangle
