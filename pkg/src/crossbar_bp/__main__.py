from crossbar_bp.cli import main

raise SystemExit(main())
