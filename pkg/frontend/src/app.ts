/** Studio assembly: wires the panels to a shared session and viewer. */

import { ApiClient } from "./api.js";
import { EditPanel } from "./editpanel.js";
import { MaskBrush } from "./maskbrush.js";
import { MixBoard } from "./mixboard.js";
import { SessionState } from "./session.js";
import { IntensitySlider } from "./slider.js";
import { OrbitViewer } from "./viewer.js";

export interface Studio {
  session: SessionState;
  viewer: OrbitViewer;
  editPanel: EditPanel;
  slider: IntensitySlider;
  mixBoard: MixBoard;
  maskBrush: MaskBrush;
  loadScene(ply: Uint8Array): Promise<string>;
}

export function createStudio(root: HTMLElement, baseUrl: string): Studio {
  const api = new ApiClient(baseUrl);
  const session = new SessionState();

  const viewerBox = section(root, "view");
  const editBox = section(root, "edit");
  const sliderBox = section(root, "intensity");
  const mixBox = section(root, "mix");
  const maskBox = section(root, "mask");

  const viewer = new OrbitViewer(api, session.orbit, viewerBox);
  const editPanel = new EditPanel(api, session, editBox);
  const slider = new IntensitySlider(api, session, viewer, sliderBox);
  const mixBoard = new MixBoard(api, session, viewer, mixBox);
  const maskBrush = new MaskBrush(api, session, viewer, maskBox);

  editPanel.onCardSelected = () => mixBoard.refreshOptions();
  maskBrush.onMasked = () => {
    editPanel.renderCards();
    mixBoard.refreshOptions();
  };

  const fileInput = document.createElement("input");
  fileInput.type = "file";
  fileInput.accept = ".ply";
  viewerBox.prepend(fileInput);
  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    await studio.loadScene(new Uint8Array(await file.arrayBuffer()));
  });

  const studio: Studio = {
    session,
    viewer,
    editPanel,
    slider,
    mixBoard,
    maskBrush,
    async loadScene(ply: Uint8Array): Promise<string> {
      const { scene_id } = await api.uploadScene(ply);
      session.sceneId = scene_id;
      const weights = await api.listWeights();
      if (weights.length > 0 && !session.weightsId) session.weightsId = weights[0];
      viewer.setScene(scene_id);
      return scene_id;
    },
  };
  return studio;
}

function section(root: HTMLElement, title: string): HTMLElement {
  const box = document.createElement("section");
  const h = document.createElement("h2");
  h.textContent = title;
  box.append(h);
  root.append(box);
  return box;
}
