#pragma once

// Umbrella header.

#include "cvfr/attacks.hpp"
#include "cvfr/attractors.hpp"
#include "cvfr/checkpoint.hpp"
#include "cvfr/datasets.hpp"
#include "cvfr/dynamics.hpp"
#include "cvfr/eigenvalues.hpp"
#include "cvfr/errors.hpp"
#include "cvfr/eval.hpp"
#include "cvfr/matrix.hpp"
#include "cvfr/model.hpp"
#include "cvfr/parallel.hpp"
#include "cvfr/rng.hpp"
#include "cvfr/spectral.hpp"
#include "cvfr/stability.hpp"
#include "cvfr/training.hpp"
