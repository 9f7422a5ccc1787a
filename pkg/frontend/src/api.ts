// Thin typed client over the engine's HTTP surface. Every console view goes
// through this module, so e2e tests can wrap `fetchImpl` and assert that all
// numbers on screen came out of an API response.

import type {
  AgentsDoc,
  ConsultationJob,
  MonitorAlertDoc,
  NewsResultDoc,
  PatientCaseDoc,
  ProblemDocument,
  SeriesPoint,
  StartedConsultation,
  TemplateEntry,
  TranscriptDoc,
  VitalsObservation,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly problem: ProblemDocument;

  constructor(status: number, problem: ProblemDocument) {
    super(problem.message);
    this.name = "ApiError";
    this.status = status;
    this.problem = problem;
  }
}

export interface StartConsultationBody {
  case_id: string;
  question?: string;
  template_id?: string;
  mode?: string;
  team?: string[];
}

export interface SpecialistConsultBody {
  case_id: string;
  specialty: string;
  question: string;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

function isProblem(value: unknown): value is ProblemDocument {
  return (
    typeof value === "object" &&
    value !== null &&
    typeof (value as ProblemDocument).code === "string" &&
    typeof (value as ProblemDocument).message === "string"
  );
}

export class ConsoleApi {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    // bind so a bare global fetch keeps its expected receiver
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    headers?: Record<string, string>,
  ): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.base + path, {
        method,
        headers: {
          ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
          ...headers,
        },
        body: body !== undefined ? JSON.stringify(body) : undefined,
      });
    } catch (err) {
      throw new ApiError(0, {
        code: "network_error",
        message: err instanceof Error ? err.message : String(err),
        detail: null,
      });
    }

    let parsed: unknown = null;
    const text = await response.text();
    if (text) {
      try {
        parsed = JSON.parse(text);
      } catch {
        parsed = null;
      }
    }

    if (!response.ok) {
      const problem = isProblem(parsed)
        ? parsed
        : { code: `http_${response.status}`, message: text || response.statusText, detail: null };
      throw new ApiError(response.status, problem);
    }
    return parsed as T;
  }

  healthz(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }

  createCase(doc: PatientCaseDoc): Promise<{ case_id: string }> {
    return this.request("POST", "/api/v1/cases", doc);
  }

  getCase(caseId: string): Promise<PatientCaseDoc> {
    return this.request("GET", `/api/v1/cases/${encodeURIComponent(caseId)}`);
  }

  appendVitals(caseId: string, obs: VitalsObservation): Promise<PatientCaseDoc> {
    return this.request("POST", `/api/v1/cases/${encodeURIComponent(caseId)}/vitals`, obs);
  }

  startConsultation(
    body: StartConsultationBody,
    idempotencyKey?: string,
  ): Promise<StartedConsultation> {
    const headers = idempotencyKey ? { "Idempotency-Key": idempotencyKey } : undefined;
    return this.request("POST", "/api/v1/consultations", body, headers);
  }

  getConsultation(transcriptId: string): Promise<ConsultationJob> {
    return this.request("GET", `/api/v1/consultations/${encodeURIComponent(transcriptId)}`);
  }

  followUp(parentTranscriptId: string, question: string): Promise<StartedConsultation> {
    return this.request(
      "POST",
      `/api/v1/consultations/${encodeURIComponent(parentTranscriptId)}/followup`,
      { question },
    );
  }

  listTemplates(): Promise<{ templates: TemplateEntry[] }> {
    return this.request("GET", "/api/v1/templates");
  }

  listAgents(): Promise<AgentsDoc> {
    return this.request("GET", "/api/v1/agents");
  }

  specialistConsult(body: SpecialistConsultBody): Promise<TranscriptDoc> {
    return this.request("POST", "/api/v1/specialist-consults", body);
  }

  evaluateRisk(caseId: string): Promise<NewsResultDoc> {
    return this.request("POST", "/api/v1/risk/evaluate", { case_id: caseId });
  }

  riskSeries(caseId: string): Promise<{ case_id: string; series: SeriesPoint[] }> {
    return this.request("GET", `/api/v1/risk/${encodeURIComponent(caseId)}/series`);
  }

  riskAlerts(caseId: string): Promise<{ case_id: string; alerts: MonitorAlertDoc[] }> {
    return this.request("GET", `/api/v1/risk/${encodeURIComponent(caseId)}/alerts`);
  }

  navigatorExplain(
    caseId: string,
    transcriptId: string,
  ): Promise<{ case_id: string; transcript_id: string; text: string }> {
    return this.request("POST", "/api/v1/navigator", {
      case_id: caseId,
      transcript_id: transcriptId,
    });
  }

  dischargeSummary(caseId: string): Promise<{ case_id: string; text: string }> {
    return this.request("POST", "/api/v1/discharge", { case_id: caseId });
  }
}
