#pragma once
// Umbrella header for the adaptive social learning laboratory.
#include "asl/analysis.hpp"
#include "asl/engine.hpp"
#include "asl/errors.hpp"
#include "asl/graph.hpp"
#include "asl/io.hpp"
#include "asl/models.hpp"
#include "asl/montecarlo.hpp"
#include "asl/nonstationary.hpp"
#include "asl/numerics.hpp"
#include "asl/rng.hpp"
#include "asl/version.hpp"
