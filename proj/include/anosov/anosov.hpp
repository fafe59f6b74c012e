#pragma once

// Everything except the io layer, which additionally needs json.hpp.

#include "anosov/error.hpp"
#include "anosov/linalg.hpp"
#include "anosov/lie.hpp"
#include "anosov/word.hpp"
#include "anosov/schottky.hpp"
#include "anosov/orbit.hpp"
#include "anosov/metric.hpp"
#include "anosov/measure.hpp"
#include "anosov/sampling.hpp"
#include "anosov/stats.hpp"
#include "anosov/suites.hpp"
