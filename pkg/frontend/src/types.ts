// JSON shapes of the annotation service API, mirrored field for field.

export interface AgentStateJson {
  t: number;
  x: number;
  y: number;
  heading: number;
  vx: number;
  vy: number;
}

export interface AgentJson {
  id: string;
  kind: string;
  length: number;
  width: number;
  // one slot per time step; null = not observed that frame
  states: (AgentStateJson | null)[];
}

export interface LaneJson {
  id: string;
  width: number;
  centerline: [number, number][];
}

export interface ScenarioPayload {
  scenario_id: string;
  dt: number;
  split_index: number;
  n_steps: number;
  ego_id: string;
  agents: AgentJson[];
  lanes: LaneJson[];
  drivable_area: [number, number][][];
}

export interface PairResponse {
  pair_id: string;
  a: ScenarioPayload;
  b: ScenarioPayload;
}

export interface LabelResponse {
  pair_id: string;
  accepted: boolean;
  effective_choice: string;
}

export interface HealthResponse {
  status: string;
  scenarios: number;
  labels: number;
  diagnostics: string[];
}

export type Choice = "A" | "B" | "skip";
