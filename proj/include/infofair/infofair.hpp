#pragma once

#include "infofair/tensor.hpp"
#include "infofair/adam.hpp"
#include "infofair/data.hpp"
#include "infofair/model.hpp"
#include "infofair/metrics.hpp"
#include "infofair/oracle.hpp"
#include "infofair/objective.hpp"
#include "infofair/synthetic.hpp"
#include "infofair/config.hpp"
#include "infofair/checkpoint.hpp"
#include "infofair/report.hpp"
#include "infofair/plot.hpp"
#include "infofair/commands.hpp"
