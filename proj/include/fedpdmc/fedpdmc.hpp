#pragma once

#include "fedpdmc/core.hpp"
#include "fedpdmc/diagnostics.hpp"
#include "fedpdmc/error.hpp"
#include "fedpdmc/experiment.hpp"
#include "fedpdmc/federated.hpp"
#include "fedpdmc/models/ar1.hpp"
#include "fedpdmc/models/cox.hpp"
#include "fedpdmc/models/data_io.hpp"
#include "fedpdmc/models/gaussian.hpp"
#include "fedpdmc/models/logistic.hpp"
#include "fedpdmc/models/synth.hpp"
#include "fedpdmc/potential.hpp"
#include "fedpdmc/privacy.hpp"
#include "fedpdmc/random.hpp"
#include "fedpdmc/rates.hpp"
#include "fedpdmc/samplers.hpp"
#include "fedpdmc/skeleton_io.hpp"
#include "fedpdmc/transport.hpp"
