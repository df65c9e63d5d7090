#pragma once

#include "gm/core.hpp"
#include "gm/random.hpp"
#include "gm/random_graphs.hpp"
#include "gm/lap.hpp"
#include "gm/ds_init.hpp"
#include "gm/faq.hpp"
#include "gm/io.hpp"
#include "gm/svg.hpp"
#include "gm/experiment.hpp"
