#pragma once

#include "billiards/errors.hpp"
#include "billiards/surface.hpp"
#include "billiards/dynamics.hpp"
#include "billiards/variation.hpp"
#include "billiards/report.hpp"
#include "billiards/experiments.hpp"
#include "billiards/config.hpp"
