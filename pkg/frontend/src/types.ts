/** Shapes mirrored from the service's JSON responses. */

export interface OpPoint {
  temp_setpoint_c: number;
  dry_solids_frac: number;
  cycle_minutes: number;
}

export interface ReactorState {
  id: number;
  running: boolean;
  steps_in_state: number;
}

export interface PlantDto {
  t_index: number;
  clock: string;
  level_pct: number;
  capacity_m3: number;
  reactors: ReactorState[];
  op_point: OpPoint;
}

export interface RecommendationDto {
  id: string;
  created_at: string;
  schedule: number[][];
  op_points: (OpPoint | null)[];
  predicted_total_energy_kwh: number;
  min_predicted_quality: number | null;
  flags: {
    quality_risk: boolean;
    not_proven_optimal: boolean;
    level_bound_violation: boolean;
  };
  input_hash: string;
  target_level_pct: number;
  inflow_forecast_pct: number[];
  planned_levels_pct: number[];
  objective: number;
  deviation_sum: number;
  switch_count: number;
  selected_candidate:
    | (OpPoint & { predicted_energy: number; predicted_quality: number; feasible: boolean })
    | null;
}

export interface ActiveScheduleDto {
  run_id: number;
  cursor: number;
  schedule: number[][];
  op_points: (OpPoint | null)[];
}

export interface ServiceConfigDto {
  target_level_pct: number;
  q_min: number;
  margin: number;
  omega: number;
  step_minutes: number;
  horizon_steps: number;
  op_bounds: {
    temp_setpoint_c: [number, number];
    dry_solids_frac: [number, number];
    cycle_minutes: [number, number];
  };
  model_trained: boolean;
}

export interface StateDto {
  plant: PlantDto;
  latest_recommendation: RecommendationDto | null;
  latest_run_id: number | null;
  active_schedule: ActiveScheduleDto | null;
  state_version: number;
  config: ServiceConfigDto;
}

export interface LevelPoint {
  timestamp: string;
  level_pct: number;
}

export interface SnapshotPayload extends StateDto {
  level_history: LevelPoint[];
  runs: RunDto[];
}

export interface WhatIfDto {
  predicted_energy: number;
  predicted_quality: number;
  feasible: boolean;
}

export interface OperatorActionDto {
  kind: "accept" | "override";
  actor: string;
  at: string;
  schedule_edits: ScheduleEdit[];
}

export interface RunDto {
  run_id: number;
  created_at: string;
  recommendation: RecommendationDto;
  operator_action: OperatorActionDto | null;
}

export interface RunListDto {
  runs: RunDto[];
  total: number;
  limit: number;
  offset: number;
}

export interface ScheduleEdit {
  reactor: number;
  step: number;
  on: boolean;
}

export interface StatePayloadEvent extends PlantDto {
  inflow_pct?: number;
  overflow?: boolean;
  underflow?: boolean;
}

export type StreamEvent =
  | { type: "snapshot"; payload: SnapshotPayload; state_version: number }
  | { type: "state"; payload: StatePayloadEvent; state_version: number }
  | {
      type: "recommendation";
      payload: { run_id: number; recommendation: RecommendationDto };
      state_version: number;
    }
  | { type: "action"; payload: RunDto; state_version: number }
  | {
      type: "violation";
      payload: { t_index: number; overflow: boolean; underflow: boolean; level_pct: number };
      state_version: number;
    };

export interface ApiErrorBody {
  error: { status: number; code: string; message: string };
}
