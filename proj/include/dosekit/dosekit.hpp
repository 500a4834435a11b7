#pragma once

#include "dosekit/contrasts.hpp"
#include "dosekit/first_stage.hpp"
#include "dosekit/gls.hpp"
#include "dosekit/io.hpp"
#include "dosekit/mct.hpp"
#include "dosekit/models.hpp"
#include "dosekit/mvnorm.hpp"
#include "dosekit/optimize.hpp"
#include "dosekit/parallel.hpp"
#include "dosekit/rng.hpp"
#include "dosekit/simulate.hpp"
#include "dosekit/stats.hpp"
#include "dosekit/svg.hpp"
#include "dosekit/types.hpp"
