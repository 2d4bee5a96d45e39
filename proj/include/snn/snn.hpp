#pragma once

#include "snn/image.hpp"
#include "snn/parallel.hpp"
#include "snn/search.hpp"
#include "snn/filter.hpp"
#include "snn/toymodel.hpp"
#include "snn/noise.hpp"
#include "snn/metrics.hpp"
