#pragma once

#include "beamqopt/classical.hpp"
#include "beamqopt/errors.hpp"
#include "beamqopt/metrics.hpp"
#include "beamqopt/model.hpp"
#include "beamqopt/quantum.hpp"
#include "beamqopt/qubo.hpp"
#include "beamqopt/scenario.hpp"
