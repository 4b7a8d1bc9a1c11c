#pragma once

#include "trimodal/data.hpp"
#include "trimodal/error.hpp"
#include "trimodal/eval.hpp"
#include "trimodal/loss.hpp"
#include "trimodal/matrix.hpp"
#include "trimodal/model.hpp"
#include "trimodal/optim.hpp"
#include "trimodal/regime.hpp"
#include "trimodal/rng.hpp"
#include "trimodal/train.hpp"
