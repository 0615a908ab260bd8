#pragma once

#include "cvfr/attractors.hpp"
#include "cvfr/dynamics.hpp"
#include "cvfr/spectral.hpp"

namespace cvfr {

/// A trained (or freshly planted) classifier: coupling parameters, the
/// planted attractors, and the integration settings it was built for.
struct Model {
    SpectralCoupling coupling;
    AttractorSet attractors;
    IntegrationConfig integration;
    std::uint64_t train_seed = 0;
};

} // namespace cvfr
