#pragma once

#include "hypercaps/training/adadelta.hpp"
#include "hypercaps/training/checkpoint.hpp"
#include "hypercaps/training/metrics.hpp"
#include "hypercaps/training/trainer.hpp"
