#pragma once

#include "noisecine/backend.hpp"
#include "noisecine/bridge_backend.hpp"
#include "noisecine/colormap.hpp"
#include "noisecine/crystal.hpp"
#include "noisecine/error.hpp"
#include "noisecine/field.hpp"
#include "noisecine/flow.hpp"
#include "noisecine/image_io.hpp"
#include "noisecine/latent_io.hpp"
#include "noisecine/liquid.hpp"
#include "noisecine/metric.hpp"
#include "noisecine/mock_backend.hpp"
#include "noisecine/pipeline.hpp"
#include "noisecine/rng.hpp"
#include "noisecine/stats.hpp"
#include "noisecine/vae_probe.hpp"
