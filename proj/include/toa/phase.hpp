#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace toa {

enum class Phase { Perceive, SelectChunks, UpdateCognition, Finalize, TieBreak };

inline constexpr std::array<Phase, 5> kAllPhases = {
    Phase::Perceive, Phase::SelectChunks, Phase::UpdateCognition, Phase::Finalize, Phase::TieBreak};

std::string_view to_string(Phase p) noexcept;
std::optional<Phase> phase_from_string(std::string_view name) noexcept;

// Efficiency accounting groups calls the way the published call tables do:
// traversal calls are "phase 2"; perception, interest selection, finalization
// and tie-breaking are "phase 1&3".
enum class PhaseGroup { Phase2, Phase13 };
PhaseGroup group_of(Phase p) noexcept;

} // namespace toa
