"""VGG11 classifier: five convolutional blocks and one fully connected
block.  Input is (channels, height, width); five 2x2 max-pools divide each
spatial dim by 32, so both input dims must be multiples of 32."""

from __future__ import annotations

from torch import nn

CONV_PLAN = [64, "M", 128, "M", 256, 256, "M", 512, 512, "M", 512, 512, "M"]


def build_vgg11(class_count: int, width: int = 512, height: int = 128, channels: int = 3) -> nn.Module:
    if class_count < 2:
        raise ValueError("need at least 2 classes")
    if width % 32 or height % 32:
        raise ValueError(f"input dims must be multiples of 32, got {width}x{height}")
    layers: list[nn.Module] = []
    in_ch = channels
    for item in CONV_PLAN:
        if item == "M":
            layers.append(nn.MaxPool2d(kernel_size=2, stride=2))
        else:
            layers.append(nn.Conv2d(in_ch, item, kernel_size=3, padding=1))
            layers.append(nn.ReLU(inplace=True))
            in_ch = item
    flat = 512 * (height // 32) * (width // 32)
    model = nn.Sequential(
        nn.Sequential(*layers),
        nn.Flatten(),
        nn.Linear(flat, class_count),
    )
    # Kaiming init keeps gradients alive through the 8-conv stack; the
    # default uniform init stalls at chance level on this depth.
    for module in model.modules():
        if isinstance(module, nn.Conv2d):
            nn.init.kaiming_normal_(module.weight, mode="fan_out", nonlinearity="relu")
            nn.init.zeros_(module.bias)
        elif isinstance(module, nn.Linear):
            nn.init.normal_(module.weight, 0, 0.01)
            nn.init.zeros_(module.bias)
    return model
