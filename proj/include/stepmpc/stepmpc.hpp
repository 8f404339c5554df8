#pragma once

// Umbrella header: the full momentum-MPC stepping stack.

#include <stepmpc/momentum_model.hpp>
#include <stepmpc/contact_constraints.hpp>
#include <stepmpc/cost_builder.hpp>
#include <stepmpc/qp_transcription.hpp>
#include <stepmpc/qp_solver.hpp>
#include <stepmpc/mpc_controller.hpp>
#include <stepmpc/simulation.hpp>
#include <stepmpc/config.hpp>
#include <stepmpc/harness.hpp>
#include <stepmpc/csv_log.hpp>
#include <stepmpc/plots.hpp>
