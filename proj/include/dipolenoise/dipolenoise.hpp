#pragma once

#include "analysis.hpp"
#include "constants.hpp"
#include "errors.hpp"
#include "fieldkernels.hpp"
#include "geometry.hpp"
#include "modes.hpp"
#include "noisecore.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "vec.hpp"
