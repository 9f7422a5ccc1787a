// Wire types mirroring the engine's interchange documents. The console never
// computes clinical values from these; it only renders what the API returned.

export interface ProblemDocument {
  code: string;
  message: string;
  detail: unknown;
}

export interface VitalsObservation {
  timestamp: string;
  respiration_rate: number;
  spo2: number;
  on_supplemental_oxygen: boolean;
  spo2_scale: "scale1" | "scale2";
  systolic_bp: number;
  heart_rate: number;
  consciousness: string;
  temperature: number;
}

export interface LabResult {
  name: string;
  value: number;
  unit: string;
  timestamp: string;
}

export interface MedicationOrder {
  name: string;
  dose: number;
  dose_unit: string;
  route: string;
  frequency: string;
}

export interface Sdoh {
  housing: string;
  substance_use: string;
  insurance: string;
  support: string;
}

export interface PatientCaseDoc {
  schema_version: number;
  case_id: string;
  demographics: { age: number; sex: string };
  chief_complaint: string;
  history: string;
  vitals: VitalsObservation[];
  labs: LabResult[];
  medications: MedicationOrder[];
  current_plan: string;
  sdoh: Sdoh;
  unit_id: string;
}

export interface Claim {
  subject: "vital" | "lab" | "medication" | "history_fact";
  name: string;
  asserted_value: string;
  numeric_value: number | null;
  source_role: string;
}

export interface ResponseSections {
  assessment: string;
  differential: Array<{ condition: string; rationale: string }>;
  plan: string[];
  claims: Claim[];
}

export type ResponseStatus = "ok" | "timed_out" | "backend_error" | "malformed";

export interface AgentResponseDoc {
  role: string;
  sections: ResponseSections | null;
  latency_ms: number;
  status: ResponseStatus;
}

export interface DivergencePoint {
  topic: string;
  positions: Array<{ role: string; position: string }>;
}

export interface SynthesisDoc {
  final_diagnosis: string;
  consensus: string[];
  divergence: DivergencePoint[];
  care_plan: string[];
  next_steps: string[];
  contributing_roles: string[];
}

export interface VerificationFlagDoc {
  claim: Claim;
  reason: string;
  record_value: string;
}

export interface VerificationDoc {
  checked: number;
  flags: VerificationFlagDoc[];
  verdict: "clean" | "flagged";
}

export interface GapFinding {
  finding: string;
  raised_by: string[];
}

export type GapCategory = "diagnosis" | "treatment" | "monitoring" | "coordination";

export interface GapReportDoc {
  summary: string;
  categories: Record<GapCategory, GapFinding[]>;
}

export interface TranscriptDoc {
  schema_version: number;
  transcript_id: string;
  case_id: string;
  question: string;
  mode: string;
  created_at: string;
  responses: AgentResponseDoc[];
  synthesis: SynthesisDoc | null;
  verification: VerificationDoc | null;
  gap_report: GapReportDoc | null;
  degraded_team: boolean;
  parent_transcript_id: string | null;
}

export type JobStatus = "pending" | "running" | "complete" | "failed";

export interface ConsultationJob {
  transcript_id: string;
  status: JobStatus;
  transcript: TranscriptDoc | null;
  error: ProblemDocument | null;
}

export interface StartedConsultation {
  transcript_id: string;
  status: JobStatus;
}

export interface TemplateEntry {
  id: string;
  title: string;
  body: string;
}

export interface AgentEntry {
  role: string;
  display_name: string;
  team: string;
  reasoning_style: string;
  charter: string;
}

export interface AgentsDoc {
  core: AgentEntry[];
  support: AgentEntry[];
  consult: AgentEntry[];
}

export interface NewsResultDoc {
  schema_version: number;
  subscores: Record<string, number>;
  total: number;
  band: string;
  scale_used: string;
}

export interface SeriesPoint {
  at: string;
  total: number;
  band: string;
}

export interface MonitorAlertDoc {
  case_id: string;
  at: string;
  previous_band: string;
  new_band: string;
  news: NewsResultDoc;
  recommendation: string;
}
