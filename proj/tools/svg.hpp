#pragma once

#include <span>
#include <string>

#include "ecgadv/attacks.hpp"
#include "ecgadv/existence.hpp"

namespace ecgadv::plot {

/// Three stacked panels: original, perturbation and adversarial. All three
/// share one vertical scale (raw units per pixel) so the perturbation is drawn
/// at the size it has relative to the tracing.
std::string attack_svg(const AttackResult& result);

/// Min/max envelope of a band with the original signal drawn on top.
std::string band_svg(const std::string& title, std::span<const double> original, const Band& band);

}  // namespace ecgadv::plot
